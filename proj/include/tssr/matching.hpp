#pragma once

#include <vector>

namespace tssr {

// Maximum-cardinality matching on a general graph (Edmonds' blossom
// algorithm, O(V^3)). Returns mate[v], or -1 for unmatched vertices.
// Vertices are tried in index order, so the result is deterministic.
std::vector<int> max_matching(int vertex_count, const std::vector<std::pair<int, int>>& edges);

}  // namespace tssr
