#include "mts/offline.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mts/error.hpp"

namespace mts {
namespace {

void check_costs(std::span<const CostVector> costs, std::size_t n) {
  for (std::size_t t = 0; t < costs.size(); ++t) {
    if (costs[t].size() != n) {
      throw DomainError("cost vector " + std::to_string(t + 1) + " has " + std::to_string(costs[t].size()) +
                        " entries, expected " + std::to_string(n));
    }
    for (double c : costs[t]) {
      if (!std::isfinite(c) || c < 0.0) throw DomainError("costs must be finite and nonnegative");
    }
  }
}

}  // namespace

OfflineTrajectory optimal_on_metric(std::span<const double> dist, std::size_t n,
                                    std::span<const CostVector> costs, std::size_t start) {
  if (n == 0) throw DomainError("offline optimum needs at least one point");
  if (dist.size() != n * n) throw DomainError("distance matrix has the wrong size");
  if (start >= n) throw DomainError("start point out of range");
  check_costs(costs, n);

  const std::size_t T = costs.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> f(n, inf);
  std::vector<double> g(n);
  f[start] = 0.0;
  std::vector<std::vector<std::size_t>> back(T, std::vector<std::size_t>(n));

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < n; ++l) {
      std::size_t arg = l;
      double best = f[l] + dist[l * n + l];
      for (std::size_t k = 0; k < n; ++k) {
        const double v = f[k] + dist[k * n + l];
        if (v < best) {
          best = v;
          arg = k;
        }
      }
      back[t][l] = arg;
      g[l] = best + costs[t][l];
    }
    f.swap(g);
  }

  std::size_t last = 0;
  for (std::size_t l = 1; l < n; ++l) {
    if (f[l] < f[last]) last = l;
  }

  OfflineTrajectory out;
  out.optimum = f[last];
  out.leaves.assign(T + 1, 0);
  out.leaves[T] = last;
  for (std::size_t t = T; t-- > 0;) out.leaves[t] = back[t][out.leaves[t + 1]];
  for (std::size_t t = 0; t < T; ++t) {
    out.service += costs[t][out.leaves[t + 1]];
    out.movement += dist[out.leaves[t] * n + out.leaves[t + 1]];
  }
  return out;
}

OfflineTrajectory optimal(const WeightedTree& tree, std::span<const CostVector> costs, std::size_t start_leaf) {
  if (tree.leaf_count() == 0) throw DomainError("tree has no leaves");
  return optimal_on_metric(tree.leaf_distance_matrix(), tree.leaf_count(), costs, start_leaf);
}

Decomposition decompose(const WeightedTree& tree, std::span<const CostVector> costs,
                        std::span<const std::size_t> leaves) {
  if (leaves.size() != costs.size() + 1) throw DomainError("trajectory length does not match the cost sequence");
  check_costs(costs, tree.leaf_count());
  for (std::size_t l : leaves) {
    if (l >= tree.leaf_count()) throw DomainError("trajectory leaf index out of range");
  }
  Decomposition d;
  for (std::size_t t = 0; t < costs.size(); ++t) {
    d.service += costs[t][leaves[t + 1]];
    d.movement += tree.leaf_distance(leaves[t], leaves[t + 1]);
  }
  return d;
}

Decomposition decompose_fractional(const WeightedTree& tree, std::span<const CostVector> costs,
                                   std::span<const MarginalState> states) {
  if (states.size() != costs.size() + 1) throw DomainError("trajectory length does not match the cost sequence");
  check_costs(costs, tree.leaf_count());
  Decomposition d;
  for (std::size_t t = 0; t < costs.size(); ++t) {
    d.service += leaf_inner(tree, costs[t], states[t + 1]);
    d.movement += weighted_l1(tree, states[t], states[t + 1]);
  }
  return d;
}

std::vector<MarginalState> to_marginals(const WeightedTree& tree, std::span<const std::size_t> leaves) {
  std::vector<MarginalState> out;
  out.reserve(leaves.size());
  for (std::size_t l : leaves) out.push_back(point_mass(tree, l));
  return out;
}

}  // namespace mts
