#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"
#include "tssr/rng.hpp"

using namespace tssr;

namespace {

ParseFailure failure(const std::vector<std::string>& symbols) {
  const auto r = parse_symbols(symbols);
  REQUIRE_FALSE(parsed(r));
  return std::get<ParseFailure>(r);
}

}  // namespace

TEST_CASE("parse failures carry a kind and token position") {
  auto f = failure({"C", "(", "C"});
  CHECK(f.kind == ParseFailure::Kind::UnbalancedBranch);
  CHECK(f.position == 1);

  f = failure({"C", "1", "C", "C"});
  CHECK(f.kind == ParseFailure::Kind::UnclosedRing);
  CHECK(f.position == 1);

  f = failure({"=", "C"});
  CHECK(f.kind == ParseFailure::Kind::BadTokenPosition);
  CHECK(f.position == 0);

  CHECK(failure({"C", "(", ")", "C"}).kind == ParseFailure::Kind::EmptyBranch);
  CHECK(failure({"C", "="}).kind == ParseFailure::Kind::DanglingBond);
  CHECK(failure({"C", ")"}).kind == ParseFailure::Kind::UnbalancedBranch);
  CHECK(failure({"C", "=", "1", "C", "C", "#", "1"}).kind == ParseFailure::Kind::DanglingBond);
  CHECK_FALSE(parsed(parse_symbols(std::vector<std::string>{})));
}

TEST_CASE("cyclopropane has three atoms and three single bonds") {
  const auto r = parse_symbols(std::vector<std::string>{"C", "1", "C", "C", "1"});
  REQUIRE(parsed(r));
  const auto& g = std::get<MolGraph>(r);
  CHECK(g.atoms.size() == 3);
  REQUIRE(g.bonds.size() == 3);
  for (const auto& b : g.bonds) CHECK(b.order == BondOrder::Single);
  const auto cyc = cyclic_bonds(g, std::vector<bool>(3, true));
  CHECK(std::all_of(cyc.begin(), cyc.end(), [](bool b) { return b; }));
}

TEST_CASE("bond orders, branches, brackets and dots") {
  const auto g = test::graph("CC(=O)[O-].[Na+]");
  REQUIRE(g.atoms.size() == 5);
  CHECK(g.bonds.size() == 3);
  CHECK(g.bonds[g.find_bond(1, 2)].order == BondOrder::Double);
  CHECK(g.atoms[3].charge == -1);
  CHECK(g.atoms[4].element == "Na");
  CHECK(g.atoms[4].charge == 1);
  CHECK(g.find_bond(3, 4) == -1);

  const auto arom = test::graph("c1ccccc1");
  for (const auto& b : arom.bonds) CHECK(b.order == BondOrder::Aromatic);
  for (const auto& a : arom.atoms) {
    CHECK(a.aromatic);
    CHECK(a.element == "C");
  }
  // Biphenyl: the bridge between two aromatic atoms is a single bond.
  const auto biphenyl = test::graph("c1ccccc1-c1ccccc1");
  const auto implicit = test::graph("c1ccccc1c1ccccc1");
  CHECK(implicit.bonds[implicit.find_bond(5, 6)].order == BondOrder::Single);
  CHECK(biphenyl.bonds[biphenyl.find_bond(5, 6)].order == BondOrder::Single);

  const auto nh = test::graph("[nH]1cccc1");
  REQUIRE(nh.atoms[0].hydrogens);
  CHECK(*nh.atoms[0].hydrogens == 1);
  CHECK(nh.atoms[0].aromatic);
}

TEST_CASE("ring closure bond taken from whichever side names it") {
  const auto g = test::graph("C=1CCC1");
  CHECK(g.bonds[g.find_bond(0, 3)].order == BondOrder::Double);
  const auto h = test::graph("C1CCC=1");
  CHECK(h.bonds[h.find_bond(0, 3)].order == BondOrder::Double);
  CHECK(failure({"C", "1", "C", "1"}).kind == ParseFailure::Kind::BadTokenPosition);
}

TEST_CASE("canonical string is independent of the input order") {
  CHECK(canonicalize(test::graph("OCC")) == canonicalize(test::graph("CCO")));
  CHECK(canonicalize(test::graph("c1ccncc1")) == canonicalize(test::graph("n1ccccc1")));
  CHECK(canonicalize(test::graph("CC(C)O")) == canonicalize(test::graph("OC(C)C")));
  CHECK(canonicalize(test::graph("CCO")) != canonicalize(test::graph("COC")));
  CHECK(canonicalize(test::graph("C=CC")) != canonicalize(test::graph("CC=C=C")));
}

TEST_CASE("canonical strings reparse to the same canonical string") {
  const auto& corpus = test::train_corpus();
  for (std::size_t i = 0; i < 300; ++i) {
    const std::string c = canonicalize(test::graph(corpus[i]));
    const auto r = parse_smiles(c);
    REQUIRE_MESSAGE(parsed(r), corpus[i] << " -> " << c);
    const auto& g = std::get<MolGraph>(r);
    CHECK(g.atoms.size() == test::graph(corpus[i]).atoms.size());
    CHECK(canonicalize(g) == c);
  }
}

TEST_CASE("relabeled graphs canonicalize identically") {
  const auto& corpus = test::train_corpus();
  Rng rng(11);
  for (std::size_t i = 0; i < 200; ++i) {
    const MolGraph g = test::graph(corpus[i]);
    std::vector<int> perm(g.atoms.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    const MolGraph h = relabel(g, perm);
    for (std::size_t a = 0; a < g.atoms.size(); ++a) CHECK(h.atoms[static_cast<std::size_t>(perm[a])].element == g.atoms[a].element);
    REQUIRE(canonicalize(h) == canonicalize(g));
  }
}

TEST_CASE("symmetric cages and repeated rings canonicalize consistently") {
  // Highly symmetric graphs exercise the tie-breaking step.
  const std::vector<std::string> mols{"C12C3C4C1C5C2C3C45", "C1CC2CCC1CC2", "c1ccc2ccccc2c1", "C1CCCCC1C1CCCCC1"};
  Rng rng(3);
  for (const auto& s : mols) {
    const MolGraph g = test::graph(s);
    const std::string c = canonicalize(g);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<int> perm(g.atoms.size());
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span<int>(perm));
      CHECK(canonicalize(relabel(g, perm)) == c);
    }
  }
}
