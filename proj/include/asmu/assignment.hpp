#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "asmu/error.hpp"

namespace asmu {

/// Dense row-major cost matrix.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Exact minimum-cost assignment of every row to a distinct column for a
/// rows <= cols cost matrix (shortest augmenting paths with dual potentials,
/// O(rows^2 * cols)). Returns the column assigned to each row.
inline std::vector<std::size_t> solve_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (n > m) throw Error(ErrorCode::invalid_argument, "assignment needs rows <= cols");
  if (n == 0) return {};

  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = 0;
  // 1-based bookkeeping; column 0 is a virtual root.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), min_slack(m + 1);
  std::vector<std::size_t> row_of_col(m + 1, none), way(m + 1, none);
  std::vector<char> used(m + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    row_of_col[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), char{0});
    do {
      used[col0] = 1;
      const std::size_t r0 = row_of_col[col0];
      double delta = inf;
      std::size_t col1 = none;
      for (std::size_t c = 1; c <= m; ++c) {
        if (used[c]) continue;
        const double slack = cost(r0 - 1, c - 1) - u[r0] - v[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= m; ++c) {
        if (used[c]) {
          u[row_of_col[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (row_of_col[col0] != none);
    do {
      const std::size_t col1 = way[col0];
      row_of_col[col0] = row_of_col[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> assignment(n);
  for (std::size_t c = 1; c <= m; ++c) {
    if (row_of_col[c] != none) assignment[row_of_col[c] - 1] = c - 1;
  }
  return assignment;
}

}  // namespace asmu
