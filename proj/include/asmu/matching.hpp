#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "asmu/assignment.hpp"
#include "asmu/error.hpp"
#include "asmu/geometry.hpp"
#include "asmu/transport.hpp"

namespace asmu {

/// Outcome of matching the smaller point set P one-to-one into the larger Q.
struct MatchResult {
  /// (index into P, index into Q)
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  /// True when the first argument played P.
  bool first_is_p = true;
  double matched_cost = 0.0;
  std::size_t unmatched_count = 0;
  double penalty = 0.0;
  double distance = 0.0;
};

namespace detail {

inline void check_penalty(double penalty_c) {
  if (!(penalty_c > 0.0) || !std::isfinite(penalty_c)) {
    throw Error(ErrorCode::invalid_argument, "penalty constant must be positive and finite");
  }
}

inline void check_frames(const PointSet& a, const PointSet& b) {
  if (!a.same_frame(b)) {
    throw Error(ErrorCode::frame_mismatch, "point sets do not share a frame");
  }
}

// Sums pair lengths in ascending order so the total does not depend on which
// argument played P or on the solver's pair order.
inline double canonical_sum(std::vector<double> lengths) {
  std::sort(lengths.begin(), lengths.end());
  double total = 0.0;
  for (double l : lengths) total += l;
  return total;
}

inline CostMatrix euclidean_costs(const PointSet& rows, const PointSet& cols) {
  CostMatrix cost(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) cost(i, j) = distance(rows[i], cols[j]);
  }
  return cost;
}

inline MatchResult finish(const PointSet& p, const PointSet& q, bool first_is_p,
                          std::vector<std::pair<std::size_t, std::size_t>> pairs, double penalty_c) {
  MatchResult r;
  std::vector<double> lengths;
  lengths.reserve(pairs.size());
  for (const auto& [i, j] : pairs) lengths.push_back(distance(p[i], q[j]));
  r.pairs = std::move(pairs);
  r.first_is_p = first_is_p;
  r.matched_cost = canonical_sum(std::move(lengths));
  r.unmatched_count = q.size() - p.size();
  r.penalty = static_cast<double>(r.unmatched_count) * penalty_c;
  r.distance = q.empty() ? 0.0 : (r.matched_cost + r.penalty) / static_cast<double>(q.size());
  return r;
}

}  // namespace detail

/// Optimal one-to-one matching distance between two point sets, plus
/// penalty_c for every point of the larger set left unmatched, normalized by
/// the larger cardinality. Both sets empty gives distance 0.
inline MatchResult spatial_matching_distance(const PointSet& a, const PointSet& b, double penalty_c) {
  detail::check_penalty(penalty_c);
  detail::check_frames(a, b);
  const bool first_is_p = a.size() <= b.size();
  const PointSet& p = first_is_p ? a : b;
  const PointSet& q = first_is_p ? b : a;

  const auto assignment = solve_assignment(detail::euclidean_costs(p, q));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(assignment.size());
  for (std::size_t i = 0; i < assignment.size(); ++i) pairs.emplace_back(i, assignment[i]);
  return detail::finish(p, q, first_is_p, std::move(pairs), penalty_c);
}

inline constexpr std::size_t brute_force_limit = 9;

/// Enumerates every injection of the smaller set into the larger. Reference
/// oracle for spatial_matching_distance; only usable for tiny sets.
inline MatchResult brute_force_matching(const PointSet& a, const PointSet& b, double penalty_c) {
  detail::check_penalty(penalty_c);
  detail::check_frames(a, b);
  if (std::max(a.size(), b.size()) > brute_force_limit) {
    throw Error(ErrorCode::too_large_for_oracle,
                "brute force matching is limited to " + std::to_string(brute_force_limit) + " points");
  }
  const bool first_is_p = a.size() <= b.size();
  const PointSet& p = first_is_p ? a : b;
  const PointSet& q = first_is_p ? b : a;

  std::vector<std::size_t> current(p.size()), best(p.size());
  std::vector<char> used(q.size(), 0);
  double best_cost = std::numeric_limits<double>::infinity();

  std::function<void(std::size_t, double)> search = [&](std::size_t depth, double cost) {
    if (depth == p.size()) {
      if (cost < best_cost) {
        best_cost = cost;
        best = current;
      }
      return;
    }
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (used[j]) continue;
      used[j] = 1;
      current[depth] = j;
      search(depth + 1, cost + distance(p[depth], q[j]));
      used[j] = 0;
    }
  };
  search(0, 0.0);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < p.size(); ++i) pairs.emplace_back(i, best[i]);
  return detail::finish(p, q, first_is_p, std::move(pairs), penalty_c);
}

/// Absolute cardinality difference |N_a - N_b|.
inline double counting_difference(const PointSet& a, const PointSet& b) noexcept {
  const auto na = a.size();
  const auto nb = b.size();
  return static_cast<double>(na > nb ? na - nb : nb - na);
}

/// Earth mover's (W1) distance between the uniform empirical measures on a
/// and b. If exactly one side is empty, a single "super-pixel" at distance
/// penalty_c from every point absorbs the mass, so the result is penalty_c.
inline double wasserstein_distance(const PointSet& a, const PointSet& b, double penalty_c) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return penalty_c;

  // Integer masses: each point of a carries N_b / g units, each of b N_a / g.
  const auto g = std::gcd(a.size(), b.size());
  const auto mass_a = static_cast<std::int64_t>(b.size() / g);
  const auto mass_b = static_cast<std::int64_t>(a.size() / g);
  const std::vector<std::int64_t> supply(a.size(), mass_a);
  const std::vector<std::int64_t> demand(b.size(), mass_b);
  const auto plan = solve_transport(detail::euclidean_costs(a, b), supply, demand);
  const double total_mass = static_cast<double>(mass_a) * static_cast<double>(a.size());
  return plan.total_cost / total_mass;
}

/// Optimal matching cost divided by the smaller cardinality, with unmatched
/// points silently dropped. Zero when either side is empty.
inline double hungarian_drop_distance(const PointSet& a, const PointSet& b) {
  if (a.empty() || b.empty()) return 0.0;
  detail::check_frames(a, b);
  const bool first_is_p = a.size() <= b.size();
  const PointSet& p = first_is_p ? a : b;
  const PointSet& q = first_is_p ? b : a;
  const auto assignment = solve_assignment(detail::euclidean_costs(p, q));
  std::vector<double> lengths;
  lengths.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) lengths.push_back(distance(p[i], q[assignment[i]]));
  return detail::canonical_sum(std::move(lengths)) / static_cast<double>(p.size());
}

/// Per-patch prediction-vs-ground-truth distance used as an uncertainty
/// surrogate. asm_step is the penalized spatial matching distance; the others
/// are ablation baselines.
enum class SurrogateMetric { asm_step, acd, awd, hungarian };

inline std::string_view to_string(SurrogateMetric m) noexcept {
  switch (m) {
    case SurrogateMetric::asm_step: return "asm-step";
    case SurrogateMetric::acd: return "acd";
    case SurrogateMetric::awd: return "awd";
    case SurrogateMetric::hungarian: return "hungarian";
  }
  return "asm-step";
}

inline std::optional<SurrogateMetric> parse_metric(std::string_view name) noexcept {
  for (auto m : {SurrogateMetric::asm_step, SurrogateMetric::acd, SurrogateMetric::awd,
                 SurrogateMetric::hungarian}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

inline double surrogate_distance(SurrogateMetric metric, const PointSet& pred, const PointSet& gt,
                                 double penalty_c) {
  switch (metric) {
    case SurrogateMetric::asm_step: return spatial_matching_distance(pred, gt, penalty_c).distance;
    case SurrogateMetric::acd: return counting_difference(pred, gt);
    case SurrogateMetric::awd: return wasserstein_distance(pred, gt, penalty_c);
    case SurrogateMetric::hungarian: return hungarian_drop_distance(pred, gt);
  }
  return 0.0;
}

}  // namespace asmu
