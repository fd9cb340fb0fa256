#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "support.hpp"
#include "tssr/metrics.hpp"
#include "tssr/rng.hpp"

using namespace tssr;

namespace {

std::vector<Fingerprint> fps(const std::vector<std::string>& smiles) {
  std::vector<Fingerprint> out;
  for (const auto& s : smiles) out.push_back(fingerprint(test::graph(s)));
  return out;
}

}  // namespace

TEST_CASE("fingerprints and Tanimoto") {
  const auto f = fps({"CCO", "OCC", "C", "c1ccccc1", "C1=CC=CC=C1"});
  CHECK(f[0] == f[1]);
  CHECK(tanimoto(f[0], f[1]) == 1.0);
  CHECK(tanimoto(f[2], f[3]) < 0.2);
  // Atom invariants include aromaticity, so the Kekulé form is a different graph.
  CHECK(f[3] != f[4]);
  CHECK(tanimoto(Fingerprint{}, Fingerprint{}) == 1.0);
  Fingerprint a, b;
  a.set(1);
  b.set(2);
  CHECK(tanimoto(a, b) == 0.0);
}

TEST_CASE("fingerprints are invariant under atom relabeling") {
  Rng rng(21);
  for (std::size_t i = 0; i < 200; ++i) {
    const MolGraph g = test::graph(test::train_corpus()[i]);
    std::vector<int> perm(g.atoms.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    REQUIRE(fingerprint(relabel(g, perm)) == fingerprint(g));
  }
}

TEST_CASE("nearest-neighbour diversity") {
  const auto same = fps({"CCO", "CCO", "CCO"});
  CHECK(nn_diversity(same) == 0.0);
  Fingerprint a, b;
  a.set(1);
  b.set(2);
  const std::vector<Fingerprint> disjoint{a, b};
  CHECK(nn_diversity(disjoint) == 1.0);

  // Pairwise oracle on ten corpus molecules.
  std::vector<std::string> mols(test::train_corpus().begin(), test::train_corpus().begin() + 10);
  const auto f = fps(mols);
  double expected = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double best = 0;
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (i != j) best = std::max(best, tanimoto(f[i], f[j]));
    }
    expected += 1 - best;
  }
  expected /= static_cast<double>(f.size());
  CHECK(nn_diversity(f) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(nn_diversity(f, 4) == nn_diversity(f, 1));
}

TEST_CASE("Murcko scaffolds") {
  CHECK(murcko_scaffold(test::graph("CCCO")).empty());
  CHECK(canonicalize(murcko_scaffold(test::graph("CCc1ccccc1"))) == canonicalize(test::graph("c1ccccc1")));
  CHECK(canonicalize(murcko_scaffold(test::graph("c1ccccc1"))) == canonicalize(test::graph("c1ccccc1")));
  // Linker between two rings is kept, substituents are not.
  CHECK(canonicalize(murcko_scaffold(test::graph("Cc1ccc(CCC2CC2)cc1O"))) ==
        canonicalize(test::graph("c1ccc(CCC2CC2)cc1")));
}

TEST_CASE("scaffold statistics against a brute-force oracle") {
  std::vector<MolGraph> gen, ref;
  for (std::size_t i = 0; i < 10; ++i) gen.push_back(test::graph(test::train_corpus()[i]));
  for (std::size_t i = 5; i < 15; ++i) ref.push_back(test::graph(test::train_corpus()[i]));
  std::set<std::string> gs, rs;
  for (const auto& g : gen) {
    const auto s = murcko_scaffold(g);
    if (!s.empty()) gs.insert(canonicalize(s));
  }
  for (const auto& g : ref) {
    const auto s = murcko_scaffold(g);
    if (!s.empty()) rs.insert(canonicalize(s));
  }
  const ScaffoldStats st = scaffold_stats(gen, ref);
  CHECK(st.scaffold_count == gs.size());
  double best_sum = 0;
  for (const auto& a : gs) {
    double best = 0;
    for (const auto& b : rs) best = std::max(best, tanimoto(fingerprint(test::graph(a)), fingerprint(test::graph(b))));
    best_sum += best;
  }
  CHECK(st.scaffold_similarity == doctest::Approx(best_sum / static_cast<double>(gs.size())).epsilon(1e-14));

  const ScaffoldStats self = scaffold_stats(gen, gen);
  CHECK(self.scaffold_similarity == doctest::Approx(1.0));
  const std::vector<MolGraph> acyclic{test::graph("CCO"), test::graph("CCCN")};
  CHECK(scaffold_stats(acyclic, ref).scaffold_count == 0);
}

TEST_CASE("generation metrics") {
  const std::vector<std::string> train{"CCO", "c1ccccc1"};
  const auto train_set = canonical_set(train);
  const std::vector<std::string> gen{"OCC", "CCN", "CCN", "C(C", "cc", "", "c1ccccc1C"};
  const GenerationMetrics m = evaluate(gen, train_set);
  CHECK(m.n_gen == 7);
  CHECK(m.n_syntactic_valid == 5);
  CHECK(m.n_chem_valid == 4);
  CHECK(m.validity == doctest::Approx(5.0 / 7.0));
  CHECK(m.chem_validity == doctest::Approx(4.0 / 7.0));
  CHECK(m.n_novel == 3);
  CHECK(m.novelty == doctest::Approx(0.75));
  CHECK(m.n_unique == 3);
  CHECK(m.uniqueness == doctest::Approx(0.75));
  CHECK(m.valid_canonical.size() == 3);

  const std::vector<std::string> junk{"C(C", "(("};
  const GenerationMetrics none = evaluate(junk, train_set);
  CHECK(none.validity == 0.0);
  CHECK(none.novelty == 0.0);
  CHECK(none.novelty_undefined);
  const GenerationMetrics fresh = evaluate(gen, {});
  CHECK(fresh.novelty == 1.0);
}

TEST_CASE("repair statistics, peak reward, throughput, proportion test") {
  std::vector<RewardBreakdown> bs(100);
  for (auto& b : bs) {
    b.path = RepairPath::ValidDirect;
    b.reward = 0.5;
  }
  RepairStats rs = repair_stats(bs);
  CHECK(rs.swap_count == 0.0);
  CHECK(rs.fix_rate == 0.0);
  for (int i = 0; i < 26; ++i) {
    bs[static_cast<std::size_t>(i)].path = RepairPath::RepairedFromInvalid;
    bs[static_cast<std::size_t>(i)].n_swaps = 1;
  }
  rs = repair_stats(bs);
  CHECK(rs.fix_rate == doctest::Approx(0.26));
  CHECK(rs.swap_count == doctest::Approx(0.26));

  CHECK(peak_reward(std::vector<double>{std::pow(0.99, 9)}) == doctest::Approx(0.913517).epsilon(1e-6));
  CHECK(peak_reward(std::vector<double>{0.2, 0.5, 0.4}) == 0.5);
  CHECK(peak_reward(std::vector<double>{-std::pow(0.99, 4), -std::pow(0.99, 9)}) == -std::pow(0.99, 9));

  CHECK(throughput(9000, 512, 11.90, 1058.06) / 1000 == doctest::Approx(51.83).epsilon(1e-3));
  CHECK(throughput(0, 512, 11.90, 10) == 0.0);

  CHECK(two_proportion_test(50, 100, 50, 100).z == 0.0);
  CHECK_FALSE(two_proportion_test(50, 100, 50, 100).significant);
  CHECK(two_proportion_test(637, 10000, 7597, 10000).significant);
  const auto t = two_proportion_test(100, 10000, 101, 10000);
  CHECK(std::abs(t.z) == doctest::Approx(0.0706).epsilon(0.01));
  CHECK_FALSE(t.significant);
}

TEST_CASE("report lines") {
  Report r;
  r.count("n", 3);
  r.fraction("f", 0.25);
  r.text("s", "x");
  CHECK(r.str() == "n = 3\nf = 0.250000\ns = x\n");
}
