#include <algorithm>
#include <functional>
#include <numeric>
#include <tuple>

#include "tssr/molparse.hpp"

namespace tssr {
namespace {

using Adjacency = std::vector<std::vector<std::pair<int, int>>>;

// Replaces arbitrary comparable keys by dense ranks 0..k-1.
template <typename Key>
int dense_ranks(const std::vector<Key>& keys, std::vector<int>& ranks) {
  const std::size_t n = keys.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });
  ranks.assign(n, 0);
  int r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && keys[static_cast<std::size_t>(order[i - 1])] < keys[static_cast<std::size_t>(order[i])]) ++r;
    ranks[static_cast<std::size_t>(order[i])] = r;
  }
  return n == 0 ? 0 : r + 1;
}

int refine(const MolGraph& g, const Adjacency& adj, std::vector<int>& ranks, int classes) {
  using Signature = std::pair<int, std::vector<std::pair<int, int>>>;
  for (;;) {
    std::vector<Signature> sig(ranks.size());
    for (std::size_t u = 0; u < ranks.size(); ++u) {
      sig[u].first = ranks[u];
      for (auto [v, k] : adj[u]) {
        sig[u].second.emplace_back(static_cast<int>(g.bonds[static_cast<std::size_t>(k)].order), ranks[static_cast<std::size_t>(v)]);
      }
      std::sort(sig[u].second.begin(), sig[u].second.end());
    }
    std::vector<int> next;
    const int next_classes = dense_ranks(sig, next);
    ranks = std::move(next);
    if (next_classes == classes) return classes;
    classes = next_classes;
  }
}

std::vector<int> canonical_ranks(const MolGraph& g, const Adjacency& adj) {
  using Key = std::tuple<std::string, bool, int, int, std::size_t, int>;
  std::vector<Key> keys;
  keys.reserve(g.atoms.size());
  for (std::size_t u = 0; u < g.atoms.size(); ++u) {
    const Atom& a = g.atoms[u];
    int order_sum = 0;
    for (auto [v, k] : adj[u]) order_sum += static_cast<int>(g.bonds[static_cast<std::size_t>(k)].order);
    keys.emplace_back(a.element, a.aromatic, a.charge, a.hydrogens.value_or(-1), adj[u].size(), order_sum);
  }
  std::vector<int> ranks;
  int classes = dense_ranks(keys, ranks);
  classes = refine(g, adj, ranks, classes);

  const int n = static_cast<int>(g.atoms.size());
  while (classes < n) {
    // Individualize the lowest-index atom of the smallest tied class. For
    // automorphic atoms every choice yields the same final ordering.
    std::vector<int> count(static_cast<std::size_t>(classes), 0);
    for (int r : ranks) ++count[static_cast<std::size_t>(r)];
    int tied = 0;
    while (count[static_cast<std::size_t>(tied)] < 2) ++tied;
    int chosen = -1;
    for (int u = 0; u < n; ++u) {
      if (ranks[static_cast<std::size_t>(u)] == tied) {
        chosen = u;
        break;
      }
    }
    std::vector<int> doubled(ranks.size());
    for (std::size_t u = 0; u < ranks.size(); ++u) doubled[u] = 2 * ranks[u] + (ranks[u] == tied ? 1 : 0);
    doubled[static_cast<std::size_t>(chosen)] = 2 * tied;
    classes = dense_ranks(doubled, ranks);
    classes = refine(g, adj, ranks, classes);
  }
  return ranks;
}

bool organic_subset(const Atom& a) {
  static const std::vector<std::string> plain = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "*"};
  static const std::vector<std::string> arom = {"B", "C", "N", "O", "P", "S"};
  const auto& set = a.aromatic ? arom : plain;
  return std::find(set.begin(), set.end(), a.element) != set.end();
}

std::string atom_text(const Atom& a) {
  std::string sym = a.element;
  if (a.aromatic) sym[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(sym[0])));
  if (!a.hydrogens && a.charge == 0 && organic_subset(a)) return sym;
  std::string out = "[" + sym;
  const int h = a.hydrogens.value_or(0);
  if (h > 0) {
    out += 'H';
    if (h > 1) out += std::to_string(h);
  }
  if (a.charge != 0) {
    out += a.charge > 0 ? '+' : '-';
    if (std::abs(a.charge) > 1) out += std::to_string(std::abs(a.charge));
  }
  return out + "]";
}

}  // namespace

std::string canonicalize(const MolGraph& g) {
  const std::size_t n = g.atoms.size();
  if (n == 0) return {};
  Adjacency adj = g.adjacency();
  const std::vector<int> rank = canonical_ranks(g, adj);
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end(), [&](auto x, auto y) { return rank[static_cast<std::size_t>(x.first)] < rank[static_cast<std::size_t>(y.first)]; });
  }
  const std::vector<bool> all(g.bonds.size(), true);
  const std::vector<bool> cyclic = cyclic_bonds(g, all);

  std::vector<bool> visited(n, false), tree(g.bonds.size(), false), ring_seen(g.bonds.size(), false);
  std::vector<int> parent_bond(n, -1);
  std::vector<std::vector<int>> ring_edges(n);

  std::function<void(int)> classify = [&](int u) {
    visited[static_cast<std::size_t>(u)] = true;
    for (auto [v, k] : adj[static_cast<std::size_t>(u)]) {
      if (k == parent_bond[static_cast<std::size_t>(u)]) continue;
      if (!visited[static_cast<std::size_t>(v)]) {
        tree[static_cast<std::size_t>(k)] = true;
        parent_bond[static_cast<std::size_t>(v)] = k;
        classify(v);
      } else if (!tree[static_cast<std::size_t>(k)] && !ring_seen[static_cast<std::size_t>(k)]) {
        ring_seen[static_cast<std::size_t>(k)] = true;
        ring_edges[static_cast<std::size_t>(u)].push_back(k);
        ring_edges[static_cast<std::size_t>(v)].push_back(k);
      }
    }
  };

  std::vector<int> roots;
  {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]; });
    for (int u : order) {
      if (visited[static_cast<std::size_t>(u)]) continue;
      roots.push_back(u);
      classify(u);
    }
  }

  auto other = [&](int k, int u) {
    const Bond& b = g.bonds[static_cast<std::size_t>(k)];
    return b.a == u ? b.b : b.a;
  };
  for (std::size_t u = 0; u < n; ++u) {
    std::sort(ring_edges[u].begin(), ring_edges[u].end(), [&](int x, int y) {
      return rank[static_cast<std::size_t>(other(x, static_cast<int>(u)))] < rank[static_cast<std::size_t>(other(y, static_cast<int>(u)))];
    });
  }

  auto bond_text = [&](int k) -> std::string {
    const Bond& b = g.bonds[static_cast<std::size_t>(k)];
    switch (b.order) {
      case BondOrder::Single:
        return g.atoms[static_cast<std::size_t>(b.a)].aromatic && g.atoms[static_cast<std::size_t>(b.b)].aromatic ? "-" : "";
      case BondOrder::Double: return "=";
      case BondOrder::Triple: return "#";
      case BondOrder::Aromatic: return cyclic[static_cast<std::size_t>(k)] ? "" : ":";
    }
    return "";
  };

  std::string out;
  std::vector<int> ring_digit(g.bonds.size(), -1);
  std::vector<bool> digit_used;
  std::function<void(int)> emit = [&](int u) {
    out += atom_text(g.atoms[static_cast<std::size_t>(u)]);
    for (int k : ring_edges[static_cast<std::size_t>(u)]) {
      int d = ring_digit[static_cast<std::size_t>(k)];
      if (d >= 0) {
        digit_used[static_cast<std::size_t>(d)] = false;
      } else {
        d = 0;
        while (static_cast<std::size_t>(d) < digit_used.size() && digit_used[static_cast<std::size_t>(d)]) ++d;
        if (static_cast<std::size_t>(d) == digit_used.size()) digit_used.push_back(false);
        digit_used[static_cast<std::size_t>(d)] = true;
        ring_digit[static_cast<std::size_t>(k)] = d;
        out += bond_text(k);
      }
      const int label = d + 1;
      out += label < 10 ? std::to_string(label) : "%" + std::to_string(label);
    }
    std::vector<std::pair<int, int>> children;
    for (auto [v, k] : adj[static_cast<std::size_t>(u)]) {
      if (tree[static_cast<std::size_t>(k)] && k != parent_bond[static_cast<std::size_t>(u)]) children.emplace_back(v, k);
    }
    for (std::size_t i = 0; i < children.size(); ++i) {
      const bool branch = i + 1 < children.size();
      if (branch) out += '(';
      out += bond_text(children[i].second);
      emit(children[i].first);
      if (branch) out += ')';
    }
  };

  for (std::size_t r = 0; r < roots.size(); ++r) {
    if (r > 0) out += '.';
    emit(roots[r]);
  }
  return out;
}

}  // namespace tssr
