#include "lineage/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "lineage/error.hpp"

namespace lineage {
namespace {

void check_weights(const Matrix& w) {
  if (w.rows() == 0 || w.cols() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "assignment needs a non-empty matrix");
  }
  if (!w.all_finite()) {
    throw Error(ErrorKind::kInvalidArgument, "assignment weights must be finite");
  }
}

Assignment finish(const Matrix& w, bool transposed, const std::vector<std::size_t>& partner) {
  Assignment out;
  out.matches.reserve(partner.size());
  for (std::size_t i = 0; i < partner.size(); ++i) {
    if (transposed) {
      out.matches.emplace_back(partner[i], i);
    } else {
      out.matches.emplace_back(i, partner[i]);
    }
  }
  std::ranges::sort(out.matches);
  for (const auto& [r, c] : out.matches) out.total_weight += w(r, c);
  return out;
}

// Min-cost assignment of every row of `cost` (n <= m) with dual potentials.
// Afterwards u_i + v_j <= cost_ij everywhere, equality on matched edges,
// v_j <= 0, and v_j == 0 on every unmatched column.
struct HungarianState {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> u;            // 1-based rows
  std::vector<double> v;            // 1-based cols
  std::vector<std::size_t> owner;   // owner[j] = row (1-based) for col j, 0 = free
};

HungarianState hungarian_min(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  HungarianState st{n, m, std::vector<double>(n + 1, 0.0), std::vector<double>(m + 1, 0.0),
                    std::vector<std::size_t>(m + 1, 0)};
  std::vector<std::size_t> way(m + 1, 0);
  std::vector<double> min_slack(m + 1);
  std::vector<char> used(m + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    st.owner[0] = i;
    std::size_t j0 = 0;
    std::ranges::fill(min_slack, kInf);
    std::ranges::fill(used, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = st.owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - st.u[i0] - st.v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          st.u[st.owner[j]] += delta;
          st.v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (st.owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      st.owner[j0] = st.owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return st;
}

// Rewrites an optimal assignment into the lexicographically smallest optimal
// one. Optimal assignments are exactly the perfect matchings of the tight
// graph once the rectangle is viewed as square with zero-cost dummy rows
// (dummies are tight with every column whose dual is zero). For each row in
// order we look for the smallest column reachable through an alternating
// cycle that avoids already-fixed rows.
void canonicalize(const Matrix& cost, const HungarianState& st, double tol,
                  std::vector<std::size_t>& row_to_col) {
  const std::size_t n = st.n;
  const std::size_t m = st.m;
  constexpr long kDummy = -1;

  std::vector<long> col_owner(m, kDummy);
  for (std::size_t i = 0; i < n; ++i) col_owner[row_to_col[i]] = static_cast<long>(i);

  auto tight = [&](std::size_t i, std::size_t j) {
    return cost(i, j) - st.u[i + 1] - st.v[j + 1] <= tol;
  };
  auto required = [&](std::size_t j) { return st.v[j + 1] < -tol; };

  std::vector<long> parent(m);
  std::vector<char> visited(m);
  std::deque<std::size_t> queue;

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t old = row_to_col[r];
    auto is_fixed = [&](long owner) { return owner >= 0 && static_cast<std::size_t>(owner) < r; };

    for (std::size_t c = 0; c < old; ++c) {
      if (is_fixed(col_owner[c]) || !tight(r, c)) continue;

      // BFS over columns: popping x means "the current owner of x must move".
      std::ranges::fill(visited, 0);
      queue.clear();
      visited[c] = 1;
      parent[c] = -1;
      queue.push_back(c);
      bool found = false;
      while (!queue.empty() && !found) {
        const std::size_t x = queue.front();
        queue.pop_front();
        const long owner = col_owner[x];
        for (std::size_t y = 0; y < m; ++y) {
          if (visited[y] || is_fixed(col_owner[y])) continue;
          const bool edge = owner == kDummy ? !required(y)
                                            : tight(static_cast<std::size_t>(owner), y);
          if (!edge) continue;
          parent[y] = static_cast<long>(x);
          if (y == old) {
            found = true;
            break;
          }
          visited[y] = 1;
          queue.push_back(y);
        }
      }
      if (!found) continue;

      std::vector<std::size_t> chain;  // c ... old
      for (long x = static_cast<long>(old); x != -1; x = parent[x]) {
        chain.push_back(static_cast<std::size_t>(x));
      }
      std::ranges::reverse(chain);
      std::vector<long> owners(chain.size());
      for (std::size_t i = 0; i < chain.size(); ++i) owners[i] = col_owner[chain[i]];
      for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        col_owner[chain[i + 1]] = owners[i];
        if (owners[i] != kDummy) row_to_col[static_cast<std::size_t>(owners[i])] = chain[i + 1];
      }
      col_owner[c] = static_cast<long>(r);
      row_to_col[r] = c;
      break;
    }
  }
}

}  // namespace

Assignment solve_max_assignment(const Matrix& weights) {
  check_weights(weights);
  const bool transposed = weights.rows() > weights.cols();
  const Matrix oriented = transposed ? weights.transposed() : weights;

  Matrix cost(oriented.rows(), oriented.cols());
  for (std::size_t i = 0; i < oriented.rows(); ++i)
    for (std::size_t j = 0; j < oriented.cols(); ++j) cost(i, j) = -oriented(i, j);

  const HungarianState st = hungarian_min(cost);
  std::vector<std::size_t> row_to_col(st.n);
  for (std::size_t j = 1; j <= st.m; ++j) {
    if (st.owner[j] != 0) row_to_col[st.owner[j] - 1] = j - 1;
  }

  const double tol = 1e-11 * std::max(1.0, weights.max_abs());
  canonicalize(cost, st, tol, row_to_col);
  return finish(weights, transposed, row_to_col);
}

Assignment brute_force_assignment(const Matrix& weights) {
  check_weights(weights);
  const bool transposed = weights.rows() > weights.cols();
  const Matrix w = transposed ? weights.transposed() : weights;
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();
  if (n > kBruteForceMaxSide) {
    throw Error(ErrorKind::kInvalidArgument,
                "brute-force assignment limited to a smaller side of " +
                    std::to_string(kBruteForceMaxSide) + ", got " + std::to_string(n));
  }

  std::vector<std::size_t> current(n);
  std::vector<std::size_t> best;
  std::vector<char> used(m, 0);
  double best_total = -std::numeric_limits<double>::infinity();

  // Depth-first in ascending column order visits injections lexicographically;
  // only a strict improvement replaces the incumbent.
  auto recurse = [&](auto&& self, std::size_t i) -> void {
    if (i == n) {
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) total += w(k, current[k]);
      if (total > best_total) {
        best_total = total;
        best = current;
      }
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      current[i] = j;
      self(self, i + 1);
      used[j] = 0;
    }
  };
  recurse(recurse, 0);
  return finish(weights, transposed, best);
}

}  // namespace lineage
