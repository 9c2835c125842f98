#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "argmine/types.hpp"

namespace argmine {

constexpr double kNoArc = -std::numeric_limits<double>::infinity();

// Maximum spanning arborescence rooted at `root` (Chu-Liu/Edmonds).
// `scores[u * n_nodes + v]` is the score of arc u -> v, kNoArc if absent.
// Ties break deterministically toward the lower-numbered source. Throws
// InfeasibleError if some node is unreachable from the root.
std::vector<std::pair<int, int>> max_arborescence(int n_nodes, int root,
                                                  const std::vector<double>& scores);

}  // namespace argmine
