#pragma once

// Online mirror descent on Q_T: bottom-up derived-cost propagation with one
// Bregman projection per internal node, cost splitting, and trajectory
// accounting.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mts/tree.hpp"

namespace mts {

struct OnlineState {
  ConditionalState q;
  MarginalState x;  // delta_map(q)
  std::size_t step = 0;
};

OnlineState make_state(const WeightedTree& tree, ConditionalState q);

// Everything one application of the update produces. Node-indexed vectors;
// alpha and derived_cost are meaningful at non-root nodes, beta at internal
// nodes (zero elsewhere).
struct UpdateResult {
  ConditionalState p;
  std::vector<double> derived_cost;
  std::vector<double> alpha;
  std::vector<double> beta;
  int max_iterations = 0;
};

// One application of the update to q with cost c (leaf-indexed). Throws
// DomainError on negative or non-finite cost entries.
UpdateResult apply_update(const WeightedTree& tree, const ConditionalState& q,
                          std::span<const double> cost, double kappa);

// <c, Delta(q)>_L evaluated bottom-up; exact when all costs in a subtree agree.
double expected_cost(const WeightedTree& tree, const ConditionalState& q, std::span<const double> cost);

struct StepAudit {
  double service = 0.0;
  double movement = 0.0;           // summed over sub-steps
  double positive_movement = 0.0;  // summed over sub-steps
  double psi_before = 0.0;
  double psi_after = 0.0;
  double Psi_before = 0.0;
  double Psi_after = 0.0;
  std::vector<double> beta;  // per node, last sub-step
  double max_alpha = 0.0;
  std::size_t sub_steps = 0;
};

// A single sub-step as seen by an observer of split_step.
struct SubStep {
  std::size_t index = 0;
  std::size_t count = 0;
  const ConditionalState& before;
  const UpdateResult& update;
  std::span<const double> cost;  // the scaled piece c / M
};

using SubStepObserver = std::function<void(const SubStep&)>;

// Number of pieces ceil(||c||_inf / eps_T); zero for a zero cost.
std::size_t split_count(const WeightedTree& tree, std::span<const double> cost, double kappa, double tau);

// One unsplit update. Service is charged at the post-move state.
std::pair<OnlineState, StepAudit> step(const WeightedTree& tree, const OnlineState& state,
                                       std::span<const double> cost, double kappa);

// The update applied M = split_count(...) times with cost c / M. A zero cost is
// one no-op sub-step.
std::pair<OnlineState, StepAudit> split_step(const WeightedTree& tree, const OnlineState& state,
                                             std::span<const double> cost, double kappa, double tau,
                                             const SubStepObserver& observer = {});

struct Trajectory {
  std::vector<OnlineState> states;  // t = 0..T
  std::vector<StepAudit> audits;    // t = 1..T
  std::vector<CostVector> costs;    // t = 1..T
  std::vector<double> cumulative_service;
  std::vector<double> cumulative_movement;
  double kappa = 1.0;
  double tau = 7.0;

  double service() const { return cumulative_service.empty() ? 0.0 : cumulative_service.back(); }
  double movement() const { return cumulative_movement.empty() ? 0.0 : cumulative_movement.back(); }
  std::size_t horizon() const { return audits.size(); }
};

// Adaptive cost source: sees the current online state before each step.
class CostSource {
 public:
  virtual ~CostSource() = default;
  virtual CostVector next(const WeightedTree& tree, const OnlineState& state) = 0;
};

Trajectory run(const WeightedTree& tree, ConditionalState q0, std::span<const CostVector> costs,
               double kappa, double tau);

Trajectory run_adaptive(const WeightedTree& tree, ConditionalState q0, CostSource& source,
                        std::size_t horizon, double kappa, double tau);

}  // namespace mts
