#include "tssr/chemcheck.hpp"

#include <algorithm>
#include <array>

#include "tssr/matching.hpp"

namespace tssr {
namespace {

struct ElementRule {
  std::string_view symbol;
  std::vector<int> valences;
  std::vector<int> charges;
};

const std::vector<ElementRule>& element_rules() {
  static const std::vector<ElementRule> rules = {
      {"B", {3}, {-1, 0}},      {"C", {4}, {-1, 0, 1}},   {"N", {3}, {-1, 0, 1}},
      {"O", {2}, {-1, 0, 1}},   {"P", {3, 5}, {0, 1}},    {"S", {2, 4, 6}, {-1, 0, 1}},
      {"F", {1}, {-1, 0}},      {"Cl", {1}, {-1, 0}},     {"Br", {1}, {-1, 0}},
      {"I", {1}, {-1, 0}},      {"H", {1}, {-1, 0, 1}},
  };
  return rules;
}

const ElementRule* find_rule(const std::string& element) {
  for (const auto& r : element_rules()) {
    if (r.symbol == element) return &r;
  }
  return nullptr;
}

enum class Need : std::uint8_t { Must, Optional, Cannot };

}  // namespace

std::string_view to_string(ProblemCategory c) {
  switch (c) {
    case ProblemCategory::ValenceExceeded: return "ValenceExceeded";
    case ProblemCategory::KekulizationFailure: return "KekulizationFailure";
    case ProblemCategory::AromaticAtomNotInRing: return "AromaticAtomNotInRing";
    case ProblemCategory::AromaticBondOutsideRing: return "AromaticBondOutsideRing";
    case ProblemCategory::BadCharge: return "BadCharge";
  }
  return "?";
}

bool element_known(const std::string& element) { return find_rule(element) != nullptr; }

std::optional<std::vector<int>> allowed_valences(const std::string& element, int charge) {
  const ElementRule* rule = find_rule(element);
  if (!rule) return std::nullopt;
  if (std::find(rule->charges.begin(), rule->charges.end(), charge) == rule->charges.end()) return std::vector<int>{};
  if (charge == 0) return rule->valences;
  const std::string_view e = rule->symbol;
  if (e == "C") return std::vector<int>{3};
  if (e == "B") return std::vector<int>{4};
  if (e == "H" || e == "F" || e == "Cl" || e == "Br" || e == "I") return std::vector<int>{0};
  // N, O, P, S: shift by the charge ([N+] -> 4, [O-] -> 1).
  std::vector<int> out;
  for (int v : rule->valences) {
    if (v + charge >= 0) out.push_back(v + charge);
  }
  return out;
}

namespace {

struct RingInfo {
  std::vector<bool> aromatic_cyclic_bond;  // aromatic bond on a ring of aromatic bonds
  std::vector<bool> cyclic_bond;           // bond on any ring
  std::vector<bool> ring_aromatic_atom;    // aromatic atom with an aromatic_cyclic_bond
};

RingInfo ring_info(const MolGraph& g) {
  RingInfo info;
  std::vector<bool> aromatic(g.bonds.size());
  for (std::size_t k = 0; k < g.bonds.size(); ++k) aromatic[k] = g.bonds[k].order == BondOrder::Aromatic;
  info.aromatic_cyclic_bond = cyclic_bonds(g, aromatic);
  info.cyclic_bond = cyclic_bonds(g, std::vector<bool>(g.bonds.size(), true));
  info.ring_aromatic_atom.assign(g.atoms.size(), false);
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    if (!info.aromatic_cyclic_bond[k]) continue;
    info.ring_aromatic_atom[static_cast<std::size_t>(g.bonds[k].a)] = true;
    info.ring_aromatic_atom[static_cast<std::size_t>(g.bonds[k].b)] = true;
  }
  return info;
}

Need classify_need(const MolGraph& g, const RingInfo& info, int u) {
  const Atom& a = g.atoms[static_cast<std::size_t>(u)];
  int base = a.hydrogens.value_or(0);
  for (const auto& b : g.bonds) {
    if (b.a != u && b.b != u) continue;
    base += b.order == BondOrder::Aromatic ? 1 : static_cast<int>(b.order);
  }
  (void)info;
  if (a.hydrogens) {
    const auto allowed = allowed_valences(a.element, a.charge);
    if (!allowed || allowed->empty()) return Need::Cannot;
    const bool now = std::find(allowed->begin(), allowed->end(), base) != allowed->end();
    const bool plus = std::find(allowed->begin(), allowed->end(), base + 1) != allowed->end();
    if (plus && now) return Need::Optional;
    if (plus) return Need::Must;
    return Need::Cannot;
  }
  if (a.element == "C" || a.element == "B") {
    const auto allowed = allowed_valences(a.element, a.charge);
    const int max_v = allowed && !allowed->empty() ? allowed->back() : 0;
    return base + 1 <= max_v ? Need::Must : Need::Cannot;
  }
  if (a.element == "N" || a.element == "P") return base == 2 ? Need::Optional : Need::Cannot;
  return Need::Cannot;
}

std::variant<KekuleAssignment, KekulizeFailure> kekulize_with(const MolGraph& g, const RingInfo& info) {
  KekuleAssignment assignment;
  assignment.orders.reserve(g.bonds.size());
  for (const auto& b : g.bonds) assignment.orders.push_back(b.order == BondOrder::Aromatic ? BondOrder::Single : b.order);

  const std::size_t n = g.atoms.size();
  std::vector<Need> need(n, Need::Cannot);
  std::vector<int> vertex(n, -1);
  std::vector<int> atom_of;
  std::vector<int> optional_vertices;
  int must_count = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (!g.atoms[u].aromatic || !info.ring_aromatic_atom[u]) continue;
    need[u] = classify_need(g, info, static_cast<int>(u));
    if (need[u] == Need::Cannot) continue;
    vertex[u] = static_cast<int>(atom_of.size());
    atom_of.push_back(static_cast<int>(u));
    if (need[u] == Need::Must) ++must_count;
    else optional_vertices.push_back(vertex[u]);
  }
  if (atom_of.empty()) return assignment;

  std::vector<std::pair<int, int>> edges;
  std::vector<int> edge_bond;
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    if (!info.aromatic_cyclic_bond[k]) continue;
    const int va = vertex[static_cast<std::size_t>(g.bonds[k].a)];
    const int vb = vertex[static_cast<std::size_t>(g.bonds[k].b)];
    if (va < 0 || vb < 0) continue;
    edges.emplace_back(va, vb);
    edge_bond.push_back(static_cast<int>(k));
  }
  const std::size_t real_edges = edges.size();

  // Optional atoms get a private dummy partner; dummies form a clique (plus a
  // parity dummy when the must count is odd). A perfect matching of this graph
  // exists iff some matching of the real graph covers every must atom.
  int total = static_cast<int>(atom_of.size());
  std::vector<int> dummies;
  for (int ov : optional_vertices) {
    edges.emplace_back(ov, total);
    dummies.push_back(total++);
  }
  if (must_count % 2 == 1 && !dummies.empty()) dummies.push_back(total++);
  for (std::size_t i = 0; i < dummies.size(); ++i) {
    for (std::size_t j = i + 1; j < dummies.size(); ++j) edges.emplace_back(dummies[i], dummies[j]);
  }

  const std::vector<int> mate = max_matching(total, edges);
  for (std::size_t e = 0; e < real_edges; ++e) {
    if (mate[static_cast<std::size_t>(edges[e].first)] == edges[e].second) {
      assignment.orders[static_cast<std::size_t>(edge_bond[e])] = BondOrder::Double;
    }
  }
  KekulizeFailure failure;
  for (std::size_t v = 0; v < atom_of.size(); ++v) {
    const int u = atom_of[v];
    if (need[static_cast<std::size_t>(u)] != Need::Must) continue;
    const int m = mate[v];
    if (m < 0 || m >= static_cast<int>(atom_of.size())) failure.atoms.push_back(u);
  }
  if (failure.atoms.empty()) return assignment;
  std::sort(failure.atoms.begin(), failure.atoms.end());
  failure.partial = std::move(assignment);
  return failure;
}

}  // namespace

std::variant<KekuleAssignment, KekulizeFailure> kekulize(const MolGraph& g) {
  return kekulize_with(g, ring_info(g));
}

ChemAnalysis analyze(const MolGraph& g, bool with_messages) {
  ChemAnalysis out;
  const RingInfo info = ring_info(g);
  auto& problems = out.diagnostics.problems;
  auto add = [&](ProblemCategory c, std::optional<int> atom, auto&& make_message) {
    problems.push_back({c, atom, with_messages ? std::string(make_message()) : std::string()});
  };

  for (std::size_t u = 0; u < g.atoms.size(); ++u) {
    if (g.atoms[u].aromatic && !info.ring_aromatic_atom[u]) {
      add(ProblemCategory::AromaticAtomNotInRing, static_cast<int>(u),
          [&] { return "non-ring atom " + std::to_string(u) + " marked aromatic"; });
    }
  }
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    if (g.bonds[k].order == BondOrder::Aromatic && !info.cyclic_bond[k]) {
      add(ProblemCategory::AromaticBondOutsideRing, g.bonds[k].a,
          [&] { return "non-ring bond " + std::to_string(k) + " marked aromatic"; });
    }
  }

  auto kek = kekulize_with(g, info);
  if (auto* fail = std::get_if<KekulizeFailure>(&kek)) {
    for (int u : fail->atoms) {
      add(ProblemCategory::KekulizationFailure, u, [&] { return "can't kekulize atom " + std::to_string(u); });
    }
    out.kekule = std::move(fail->partial);
  } else {
    out.kekule = std::move(std::get<KekuleAssignment>(kek));
  }

  out.hydrogens.assign(g.atoms.size(), 0);
  std::vector<int> valence(g.atoms.size(), 0);
  for (std::size_t k = 0; k < g.bonds.size(); ++k) {
    const int order = static_cast<int>(out.kekule.orders[k]);
    valence[static_cast<std::size_t>(g.bonds[k].a)] += order;
    valence[static_cast<std::size_t>(g.bonds[k].b)] += order;
  }
  for (std::size_t u = 0; u < g.atoms.size(); ++u) {
    const Atom& a = g.atoms[u];
    const int explicit_h = a.hydrogens.value_or(0);
    const int total = valence[u] + explicit_h;
    out.hydrogens[u] = explicit_h;
    const auto allowed = allowed_valences(a.element, a.charge);
    if (!allowed) continue;
    if (allowed->empty()) {
      add(ProblemCategory::BadCharge, static_cast<int>(u), [&] {
        return "unsupported charge " + std::to_string(a.charge) + " on atom " + std::to_string(u) + " (" + a.element + ")";
      });
      continue;
    }
    if (total > allowed->back()) {
      add(ProblemCategory::ValenceExceeded, static_cast<int>(u), [&] {
        return "explicit valence for atom " + std::to_string(u) + " " + a.element + ", " + std::to_string(total) +
               ", is greater than permitted";
      });
      continue;
    }
    if (!a.hydrogens) {
      const auto it = std::lower_bound(allowed->begin(), allowed->end(), total);
      out.hydrogens[u] = *it - total;
    }
  }

  std::stable_sort(problems.begin(), problems.end(), [](const ChemProblem& x, const ChemProblem& y) {
    if (x.category != y.category) return x.category < y.category;
    return x.atom.value_or(-1) < y.atom.value_or(-1);
  });
  return out;
}

Diagnostics detect_problems(const MolGraph& g) { return analyze(g, true).diagnostics; }

std::size_t count_problems(const MolGraph& g) { return analyze(g, false).diagnostics.count(); }

}  // namespace tssr
