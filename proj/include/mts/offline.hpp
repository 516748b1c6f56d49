#pragma once

// Offline optimum of a cost sequence by dynamic programming over leaf states,
// and service/movement accounting for arbitrary offline trajectories.

#include <cstddef>
#include <span>
#include <vector>

#include "mts/tree.hpp"

namespace mts {

struct OfflineTrajectory {
  std::vector<std::size_t> leaves;  // rho_0..rho_T as canonical leaf indices
  double optimum = 0.0;             // DP value
  double service = 0.0;
  double movement = 0.0;

  double total() const { return service + movement; }
};

// DP over n points with an n x n row-major distance matrix. Ties prefer
// staying, then the lowest index. Throws DomainError on bad input.
OfflineTrajectory optimal_on_metric(std::span<const double> dist, std::size_t n,
                                    std::span<const CostVector> costs, std::size_t start);

OfflineTrajectory optimal(const WeightedTree& tree, std::span<const CostVector> costs, std::size_t start_leaf);

struct Decomposition {
  double service = 0.0;
  double movement = 0.0;

  double total() const { return service + movement; }
};

// leaves has T+1 entries; costs has T.
Decomposition decompose(const WeightedTree& tree, std::span<const CostVector> costs,
                        std::span<const std::size_t> leaves);
// Fractional trajectory in K_T; movement in l1(w).
Decomposition decompose_fractional(const WeightedTree& tree, std::span<const CostVector> costs,
                                   std::span<const MarginalState> states);

std::vector<MarginalState> to_marginals(const WeightedTree& tree, std::span<const std::size_t> leaves);

}  // namespace mts
