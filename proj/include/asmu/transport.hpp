#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "asmu/assignment.hpp"
#include "asmu/error.hpp"

namespace asmu {

struct TransportPlan {
  /// flow(i, j) is the mass shipped from source i to sink j.
  std::vector<std::int64_t> flow;
  std::size_t sources = 0;
  std::size_t sinks = 0;
  double total_cost = 0.0;

  std::int64_t at(std::size_t i, std::size_t j) const { return flow[i * sinks + j]; }
};

/// Exact balanced transportation problem with integer supplies and demands,
/// solved as min-cost flow by successive shortest paths (Dijkstra on reduced
/// costs). Costs must be non-negative and finite.
inline TransportPlan solve_transport(const CostMatrix& cost, std::span<const std::int64_t> supply,
                                     std::span<const std::int64_t> demand) {
  const std::size_t ns = cost.rows();
  const std::size_t nd = cost.cols();
  if (supply.size() != ns || demand.size() != nd) {
    throw Error(ErrorCode::shape, "supply/demand sizes do not match the cost matrix");
  }
  const auto total_supply = std::accumulate(supply.begin(), supply.end(), std::int64_t{0});
  const auto total_demand = std::accumulate(demand.begin(), demand.end(), std::int64_t{0});
  if (total_supply != total_demand) {
    throw Error(ErrorCode::invalid_argument, "transport problem is unbalanced");
  }
  for (auto s : supply) {
    if (s < 0) throw Error(ErrorCode::invalid_argument, "negative supply");
  }
  for (auto d : demand) {
    if (d < 0) throw Error(ErrorCode::invalid_argument, "negative demand");
  }

  TransportPlan plan;
  plan.sources = ns;
  plan.sinks = nd;
  plan.flow.assign(ns * nd, 0);
  if (total_supply == 0) return plan;

  // Node layout: sources [0, ns), sinks [ns, ns + nd), super-source S, super-sink T.
  const std::size_t S = ns + nd;
  const std::size_t T = S + 1;
  const std::size_t V = T + 1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t no_node = std::numeric_limits<std::size_t>::max();

  std::vector<std::int64_t> supply_left(supply.begin(), supply.end());
  std::vector<std::int64_t> demand_left(demand.begin(), demand.end());
  std::vector<double> potential(V, 0.0), dist(V);
  std::vector<std::size_t> prev(V);
  std::vector<char> done(V);

  auto relax = [&](std::size_t from, std::size_t to, double edge_cost) {
    const double reduced = std::max(0.0, edge_cost + potential[from] - potential[to]);
    if (dist[from] + reduced < dist[to]) {
      dist[to] = dist[from] + reduced;
      prev[to] = from;
    }
  };

  std::int64_t remaining = total_supply;
  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), no_node);
    std::fill(done.begin(), done.end(), char{0});
    dist[S] = 0.0;

    for (;;) {
      std::size_t u = no_node;
      for (std::size_t v = 0; v < V; ++v) {
        if (!done[v] && dist[v] < inf && (u == no_node || dist[v] < dist[u])) u = v;
      }
      if (u == no_node) break;
      done[u] = 1;
      if (u == S) {
        for (std::size_t i = 0; i < ns; ++i) {
          if (supply_left[i] > 0) relax(S, i, 0.0);
        }
      } else if (u < ns) {
        for (std::size_t j = 0; j < nd; ++j) relax(u, ns + j, cost(u, j));
      } else if (u < S) {
        const std::size_t j = u - ns;
        for (std::size_t i = 0; i < ns; ++i) {
          if (plan.flow[i * nd + j] > 0) relax(u, i, -cost(i, j));
        }
        if (demand_left[j] > 0) relax(u, T, 0.0);
      }
    }
    if (!(dist[T] < inf)) {
      throw Error(ErrorCode::invalid_argument, "transport problem has no feasible augmenting path");
    }
    for (std::size_t v = 0; v < V; ++v) potential[v] += std::min(dist[v], dist[T]);

    // Bottleneck along the path T <- ... <- S.
    std::int64_t push = remaining;
    for (std::size_t v = T; v != S; v = prev[v]) {
      const std::size_t p = prev[v];
      if (p == S) {
        push = std::min(push, supply_left[v]);
      } else if (v == T) {
        push = std::min(push, demand_left[p - ns]);
      } else if (p >= ns) {
        push = std::min(push, plan.flow[v * nd + (p - ns)]);  // cancelling flow i <- j
      }
    }
    for (std::size_t v = T; v != S; v = prev[v]) {
      const std::size_t p = prev[v];
      if (p == S) {
        supply_left[v] -= push;
      } else if (v == T) {
        demand_left[p - ns] -= push;
      } else if (p < ns) {
        plan.flow[p * nd + (v - ns)] += push;
      } else {
        plan.flow[v * nd + (p - ns)] -= push;
      }
    }
    remaining -= push;
  }

  double total = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nd; ++j) {
      if (plan.flow[i * nd + j] != 0) total += static_cast<double>(plan.flow[i * nd + j]) * cost(i, j);
    }
  }
  plan.total_cost = total;
  return plan;
}

}  // namespace asmu
