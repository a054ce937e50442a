#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "swarmtrack/types.hpp"

namespace swarmtrack {

struct OspaParams {
  double c = 40.0;
  double p = 2.0;
};

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the column chosen for each row. O(n^2 m) shortest augmenting path.
inline std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost[0].size();
  if (m < n) throw std::invalid_argument("hungarian: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace detail {

inline double min_assignment_exhaustive(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const std::size_t m = cost[0].size();
  std::vector<std::size_t> cols(m);
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Enumerate ordered selections of n columns via permutations of all m.
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i][cols[i]];
    best = std::min(best, s);
    std::reverse(cols.begin() + static_cast<std::ptrdiff_t>(n), cols.end());
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace detail

/// Optimal subpattern assignment distance between two finite point sets.
inline double ospa(const std::vector<Vec2>& estimates, const std::vector<Vec2>& truths, const OspaParams& params) {
  const std::vector<Vec2>* X = &estimates;
  const std::vector<Vec2>* Y = &truths;
  if (X->size() > Y->size()) std::swap(X, Y);
  const std::size_t m = X->size();
  const std::size_t n = Y->size();
  if (n == 0) return 0.0;
  const double cp = std::pow(params.c, params.p);
  double loc = 0.0;
  if (m > 0) {
    std::vector<std::vector<double>> cost(m, std::vector<double>(n));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        cost[i][j] = std::pow(std::min(params.c, ((*X)[i] - (*Y)[j]).norm()), params.p);
    if (n <= 6) {
      loc = detail::min_assignment_exhaustive(cost);
    } else {
      const auto a = hungarian(cost);
      for (std::size_t i = 0; i < m; ++i) loc += cost[i][a[i]];
    }
  }
  const double total = (loc + cp * static_cast<double>(n - m)) / static_cast<double>(n);
  return std::pow(total, 1.0 / params.p);
}

struct EpochSummary {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Per-epoch mean and normal-approximation 95% interval across trials.
/// `curves` is trials x epochs.
inline std::vector<EpochSummary> summarize(const std::vector<std::vector<double>>& curves) {
  if (curves.size() < 2) throw std::invalid_argument("summarize: at least 2 trials required");
  const std::size_t epochs = curves.front().size();
  for (const auto& c : curves)
    if (c.size() != epochs) throw std::invalid_argument("summarize: ragged trial curves");
  const double k = static_cast<double>(curves.size());
  std::vector<EpochSummary> out(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c[e];
    const double mean = sum / k;
    double ss = 0.0;
    for (const auto& c : curves) ss += (c[e] - mean) * (c[e] - mean);
    const double stderr_ = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
    out[e] = {mean, mean - 1.96 * stderr_, mean + 1.96 * stderr_};
  }
  return out;
}

}  // namespace swarmtrack
