#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lineage/matrix.hpp"

namespace lineage {

struct Assignment {
  /// (row, col) pairs sorted by row; min(p, q) of them.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  /// Sum of the selected weights, accumulated in row order.
  double total_weight = 0.0;
};

/// Maximum-weight rectangular linear assignment (shortest augmenting path
/// Hungarian method on the smaller side, no padding).
///
/// Ties between optimal assignments resolve to the lexicographically smallest
/// partner sequence of the smaller side: for p <= q the lowest row takes the
/// lowest column it can while staying optimal, then the next row, and so on.
/// For p > q the same rule applies with columns as the smaller side.
Assignment solve_max_assignment(const Matrix& weights);

inline constexpr std::size_t kBruteForceMaxSide = 8;

/// Exhaustive enumeration of injections from the smaller side, with the same
/// tie rule. Test oracle; min(p, q) must not exceed kBruteForceMaxSide.
Assignment brute_force_assignment(const Matrix& weights);

}  // namespace lineage
