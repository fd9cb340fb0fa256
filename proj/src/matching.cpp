#include "tssr/matching.hpp"

#include <deque>

namespace tssr {
namespace {

class Blossom {
 public:
  Blossom(int n, const std::vector<std::pair<int, int>>& edges)
      : n_(n), adj_(static_cast<std::size_t>(n)), mate_(static_cast<std::size_t>(n), -1) {
    for (auto [a, b] : edges) {
      if (a == b) continue;
      adj_[static_cast<std::size_t>(a)].push_back(b);
      adj_[static_cast<std::size_t>(b)].push_back(a);
    }
  }

  std::vector<int> solve() {
    // Greedy warm start.
    for (int v = 0; v < n_; ++v) {
      if (mate(v) != -1) continue;
      for (int u : adj_[static_cast<std::size_t>(v)]) {
        if (mate(u) == -1) {
          mate(u) = v;
          mate(v) = u;
          break;
        }
      }
    }
    for (int v = 0; v < n_; ++v) {
      if (mate(v) != -1) continue;
      const int end = find_path(v);
      // Flip the augmenting path.
      for (int u = end; u != -1;) {
        const int pv = parent_[static_cast<std::size_t>(u)];
        const int ppv = mate(pv);
        mate(u) = pv;
        mate(pv) = u;
        u = ppv;
      }
    }
    return mate_;
  }

 private:
  int& mate(int v) { return mate_[static_cast<std::size_t>(v)]; }

  int lca(int a, int b) {
    std::vector<bool> used(static_cast<std::size_t>(n_), false);
    for (;;) {
      a = base_[static_cast<std::size_t>(a)];
      used[static_cast<std::size_t>(a)] = true;
      if (mate(a) == -1) break;
      a = parent_[static_cast<std::size_t>(mate(a))];
    }
    for (;;) {
      b = base_[static_cast<std::size_t>(b)];
      if (used[static_cast<std::size_t>(b)]) return b;
      b = parent_[static_cast<std::size_t>(mate(b))];
    }
  }

  void mark_path(int v, int b, int child) {
    while (base_[static_cast<std::size_t>(v)] != b) {
      blossom_[static_cast<std::size_t>(base_[static_cast<std::size_t>(v)])] = true;
      blossom_[static_cast<std::size_t>(base_[static_cast<std::size_t>(mate(v))])] = true;
      parent_[static_cast<std::size_t>(v)] = child;
      child = mate(v);
      v = parent_[static_cast<std::size_t>(mate(v))];
    }
  }

  // Returns the free vertex ending an augmenting path from root, or -1.
  int find_path(int root) {
    const auto n = static_cast<std::size_t>(n_);
    used_.assign(n, false);
    parent_.assign(n, -1);
    base_.resize(n);
    for (int i = 0; i < n_; ++i) base_[static_cast<std::size_t>(i)] = i;
    used_[static_cast<std::size_t>(root)] = true;
    std::deque<int> queue{root};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int to : adj_[static_cast<std::size_t>(v)]) {
        if (base_[static_cast<std::size_t>(v)] == base_[static_cast<std::size_t>(to)] || mate(v) == to) continue;
        if (to == root || (mate(to) != -1 && parent_[static_cast<std::size_t>(mate(to))] != -1)) {
          const int cur = lca(v, to);
          blossom_.assign(n, false);
          mark_path(v, cur, to);
          mark_path(to, cur, v);
          for (int i = 0; i < n_; ++i) {
            if (blossom_[static_cast<std::size_t>(base_[static_cast<std::size_t>(i)])]) {
              base_[static_cast<std::size_t>(i)] = cur;
              if (!used_[static_cast<std::size_t>(i)]) {
                used_[static_cast<std::size_t>(i)] = true;
                queue.push_back(i);
              }
            }
          }
        } else if (parent_[static_cast<std::size_t>(to)] == -1) {
          parent_[static_cast<std::size_t>(to)] = v;
          if (mate(to) == -1) return to;
          used_[static_cast<std::size_t>(mate(to))] = true;
          queue.push_back(mate(to));
        }
      }
    }
    return -1;
  }

  int n_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> mate_;
  std::vector<int> parent_;
  std::vector<int> base_;
  std::vector<bool> used_;
  std::vector<bool> blossom_;
};

}  // namespace

std::vector<int> max_matching(int vertex_count, const std::vector<std::pair<int, int>>& edges) {
  return Blossom(vertex_count, edges).solve();
}

}  // namespace tssr
