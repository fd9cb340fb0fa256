#include <doctest.h>

#include <algorithm>
#include <map>

#include "support.hpp"
#include "tssr/chemcheck.hpp"
#include "tssr/matching.hpp"
#include "tssr/rng.hpp"

using namespace tssr;

namespace {

std::vector<std::pair<ProblemCategory, int>> problems(const std::string& smiles) {
  std::vector<std::pair<ProblemCategory, int>> out;
  for (const auto& p : detect_problems(test::graph(smiles)).problems) out.emplace_back(p.category, p.atom.value_or(-1));
  return out;
}

// Largest matching by exhaustive search over edge subsets.
int brute_max_matching(int n, const std::vector<std::pair<int, int>>& edges) {
  int best = 0;
  const std::size_t m = edges.size();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    int size = 0;
    bool ok = true;
    for (std::size_t e = 0; e < m && ok; ++e) {
      if (!(mask >> e & 1u)) continue;
      auto [a, b] = edges[e];
      if (used[static_cast<std::size_t>(a)] || used[static_cast<std::size_t>(b)]) ok = false;
      used[static_cast<std::size_t>(a)] = used[static_cast<std::size_t>(b)] = true;
      ++size;
    }
    if (ok) best = std::max(best, size);
  }
  return best;
}

// Independent kekulization check: every subset of aromatic bonds is tried as
// the set of double bonds. Carbon ring atoms need exactly one double bond,
// pyridine-type n may take one, [nH], o and s take none.
bool brute_kekulizable(const MolGraph& g) {
  std::vector<int> arom;
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    if (g.bonds[k].order == BondOrder::Aromatic) arom.push_back(static_cast<int>(k));
  }
  REQUIRE(arom.size() <= 16);
  const auto adj = g.adjacency();
  std::vector<int> lo(g.atoms.size(), 0), hi(g.atoms.size(), 0);
  for (std::size_t u = 0; u < g.atoms.size(); ++u) {
    const Atom& a = g.atoms[u];
    if (!a.aromatic) continue;
    int arom_bonds = 0, exo_order = 0;
    for (auto [v, k] : adj[u]) {
      const BondOrder o = g.bonds[static_cast<std::size_t>(k)].order;
      if (o == BondOrder::Aromatic) ++arom_bonds;
      else exo_order += static_cast<int>(o);
    }
    const int degree = static_cast<int>(adj[u].size());
    if (a.element == "C" && !a.hydrogens && a.charge == 0) {
      // A carbon already carrying an exocyclic double bond has no room left.
      lo[u] = hi[u] = arom_bonds + exo_order + 1 <= 4 ? 1 : 0;
    } else if (a.element == "N" && !a.hydrogens && a.charge == 0) {
      lo[u] = 0;
      hi[u] = (degree == 2 && arom_bonds == 2) ? 1 : 0;
    }
  }
  for (std::uint32_t mask = 0; mask < (1u << arom.size()); ++mask) {
    std::vector<int> doubles(g.atoms.size(), 0);
    for (std::size_t i = 0; i < arom.size(); ++i) {
      if (!(mask >> i & 1u)) continue;
      const Bond& b = g.bonds[static_cast<std::size_t>(arom[i])];
      ++doubles[static_cast<std::size_t>(b.a)];
      ++doubles[static_cast<std::size_t>(b.b)];
    }
    bool ok = true;
    for (std::size_t u = 0; u < g.atoms.size() && ok; ++u) ok = doubles[u] >= lo[u] && doubles[u] <= hi[u];
    if (ok) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("sound molecules report no problems") {
  for (const char* s : {"CCO", "c1ccccc1", "c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "C[N+](C)(C)C",
                        "O=[N+]([O-])c1ccccc1", "CS(=O)(=O)C", "O=P(O)(O)O", "[Na+].[Cl-]", "Cn1cnc2c1c(=O)n(C)c(=O)n2C"}) {
    CHECK_MESSAGE(count_problems(test::graph(s)) == 0, s);
  }
}

TEST_CASE("documented problem examples") {
  CHECK(problems("C(C)(C)(C)(C)C") == std::vector<std::pair<ProblemCategory, int>>{{ProblemCategory::ValenceExceeded, 0}});
  CHECK(problems("cc") == std::vector<std::pair<ProblemCategory, int>>{{ProblemCategory::AromaticAtomNotInRing, 0},
                                                                      {ProblemCategory::AromaticAtomNotInRing, 1}});
  CHECK(problems("c1cccc1") == std::vector<std::pair<ProblemCategory, int>>{{ProblemCategory::KekulizationFailure, 4}});
  // Four aromatic carbons pair up as two double bonds.
  CHECK(problems("c1ccc1").empty());
  CHECK(problems("O=C=O=C").size() == 1);
  CHECK(problems("[O+2]").front().first == ProblemCategory::BadCharge);
  CHECK(problems("C-c1ccccc1").empty());
}

TEST_CASE("problems are ordered by category then atom") {
  const auto p = detect_problems(test::graph("C(C)(C)(C)(C)Ccc.c1cccc1"));
  REQUIRE(p.count() >= 3);
  for (std::size_t i = 1; i < p.problems.size(); ++i) {
    const auto& a = p.problems[i - 1];
    const auto& b = p.problems[i];
    CHECK((a.category < b.category || (a.category == b.category && a.atom.value_or(-1) <= b.atom.value_or(-1))));
  }
  CHECK(count_problems(test::graph("C(C)(C)(C)(C)Ccc.c1cccc1")) == p.count());
}

TEST_CASE("valence table") {
  CHECK(*allowed_valences("C", 0) == std::vector<int>{4});
  CHECK(*allowed_valences("N", 1) == std::vector<int>{4});
  CHECK(*allowed_valences("O", -1) == std::vector<int>{1});
  CHECK(*allowed_valences("S", 0) == std::vector<int>{2, 4, 6});
  CHECK(allowed_valences("O", 2)->empty());
  CHECK_FALSE(allowed_valences("Xe", 0));
}

TEST_CASE("implicit hydrogens fill to the smallest allowed valence") {
  const auto a = analyze(test::graph("CS(C)=O"));
  CHECK(a.hydrogens[0] == 3);
  CHECK(a.hydrogens[1] == 0);
  const auto b = analyze(test::graph("c1ccccc1"));
  for (int h : b.hydrogens) CHECK(h == 1);
  const auto c = analyze(test::graph("[NH4+]"));
  CHECK(c.hydrogens[0] == 4);
}

TEST_CASE("kekule assignment of benzene alternates") {
  const MolGraph g = test::graph("c1ccccc1");
  const auto k = kekulize(g);
  REQUIRE(std::holds_alternative<KekuleAssignment>(k));
  std::vector<int> doubles(6, 0);
  const auto& orders = std::get<KekuleAssignment>(k).orders;
  for (std::size_t i = 0; i < g.bonds.size(); ++i) {
    if (orders[i] == BondOrder::Double) {
      ++doubles[static_cast<std::size_t>(g.bonds[i].a)];
      ++doubles[static_cast<std::size_t>(g.bonds[i].b)];
    }
  }
  for (int d : doubles) CHECK(d == 1);
}

TEST_CASE("blossom matching agrees with exhaustive search") {
  Rng rng(5);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(9));
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (edges.size() < 14 && rng.uniform() < 0.35) edges.emplace_back(a, b);
      }
    }
    const auto mate = max_matching(n, edges);
    int size = 0;
    for (int v = 0; v < n; ++v) {
      const int m = mate[static_cast<std::size_t>(v)];
      if (m < 0) continue;
      REQUIRE(mate[static_cast<std::size_t>(m)] == v);
      const bool edge = std::any_of(edges.begin(), edges.end(), [&](auto e) {
        return (e.first == v && e.second == m) || (e.first == m && e.second == v);
      });
      REQUIRE(edge);
      ++size;
    }
    REQUIRE(size / 2 == brute_max_matching(n, edges));
  }
}

TEST_CASE("kekulization agrees with exhaustive double-bond placement") {
  // Ring systems from the corpus plus single-atom edits that may break them.
  Rng rng(17);
  int checked = 0, failures = 0;
  for (const auto& line : test::train_corpus()) {
    if (checked >= 600) break;
    const auto r = parse_smiles(line);
    if (!parsed(r)) continue;
    MolGraph g = std::get<MolGraph>(r);
    int aromatic_bonds = 0;
    for (const auto& b : g.bonds) aromatic_bonds += b.order == BondOrder::Aromatic;
    if (aromatic_bonds == 0 || aromatic_bonds > 16) continue;
    bool plain = true;
    for (const auto& a : g.atoms) {
      if (a.aromatic && !((a.element == "C" && !a.hydrogens && a.charge == 0) ||
                          (a.element == "N" && a.charge == 0) || a.element == "O" || a.element == "S")) {
        plain = false;
      }
    }
    if (!plain) continue;
    for (int edit = 0; edit < 3; ++edit) {
      MolGraph h = g;
      if (edit > 0) {
        std::vector<std::size_t> aro;
        for (std::size_t u = 0; u < h.atoms.size(); ++u) {
          if (h.atoms[u].aromatic && h.atoms[u].element == "C") aro.push_back(u);
        }
        if (aro.empty()) continue;
        Atom& a = h.atoms[aro[rng.below(aro.size())]];
        if (edit == 1) a.element = "N";
        else a.hydrogens = 1, a.element = "N";
      }
      const bool kek = std::holds_alternative<KekuleAssignment>(kekulize(h));
      const bool brute = brute_kekulizable(h);
      REQUIRE_MESSAGE(kek == brute, line << " edit " << edit);
      failures += !kek;
      ++checked;
    }
  }
  CHECK(checked >= 600);
  CHECK(failures > 0);
}

TEST_CASE("every training molecule is chemically sound") {
  std::size_t bad = 0;
  for (const auto& line : test::train_corpus()) bad += count_problems(test::graph(line)) != 0;
  CHECK(bad == 0);
}
