#include "mts/online.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mts/error.hpp"
#include "mts/potentials.hpp"
#include "mts/projection.hpp"

namespace mts {
namespace {

constexpr double kMaxSplit = 1e9;

void check_cost(const WeightedTree& tree, std::span<const double> cost) {
  if (cost.size() != tree.leaf_count()) {
    throw DomainError("cost vector has " + std::to_string(cost.size()) + " entries, tree has " +
                      std::to_string(tree.leaf_count()) + " leaves");
  }
  for (double c : cost) {
    if (!std::isfinite(c) || c < 0.0) throw DomainError("cost entries must be finite and nonnegative");
  }
}

// Weighted average of child values; exact when they all agree.
double combine(const WeightedTree& tree, NodeId u, const ConditionalState& q, const std::vector<double>& value) {
  const auto kids = tree.children(u);
  const double first = value[static_cast<std::size_t>(kids.front())];
  bool equal = true;
  double s = 0.0;
  for (NodeId v : kids) {
    const double c = value[static_cast<std::size_t>(v)];
    equal = equal && c == first;
    s += q[v] * c;
  }
  return equal ? first : s;
}

}  // namespace

OnlineState make_state(const WeightedTree& tree, ConditionalState q) {
  if (!is_conditional_state(tree, q)) throw DomainError("initial state is not in Q_T");
  OnlineState s;
  s.x = delta_map(tree, q);
  s.q = std::move(q);
  return s;
}

UpdateResult apply_update(const WeightedTree& tree, const ConditionalState& q,
                          std::span<const double> cost, double kappa) {
  check_cost(tree, cost);
  const std::size_t n = tree.node_count();
  const NodeParams& par = tree.params();
  UpdateResult r;
  r.p = q;
  r.derived_cost.assign(n, 0.0);
  r.alpha.assign(n, 0.0);
  r.beta.assign(n, 0.0);
  for (std::size_t i = 0; i < tree.leaf_count(); ++i) {
    r.derived_cost[static_cast<std::size_t>(tree.leaves()[i])] = cost[i];
  }

  ProjectionInput in;
  in.kappa = kappa;
  for (NodeId u : tree.internal_nodes()) {
    const auto kids = tree.children(u);
    in.children.clear();
    for (NodeId v : kids) {
      const auto vi = static_cast<std::size_t>(v);
      in.children.push_back({q[v], r.derived_cost[vi], tree.weight(v), par.eta[vi], par.delta[vi]});
    }
    const ProjectionOutput out = project_node(in);
    for (std::size_t i = 0; i < kids.size(); ++i) {
      r.p[kids[i]] = out.p[i];
      r.alpha[static_cast<std::size_t>(kids[i])] = out.alpha[i];
    }
    r.beta[static_cast<std::size_t>(u)] = out.beta;
    r.max_iterations = std::max(r.max_iterations, out.diagnostics.iterations);
    r.derived_cost[static_cast<std::size_t>(u)] = combine(tree, u, r.p, r.derived_cost);
  }
  return r;
}

double expected_cost(const WeightedTree& tree, const ConditionalState& q, std::span<const double> cost) {
  std::vector<double> value(tree.node_count(), 0.0);
  for (std::size_t i = 0; i < tree.leaf_count(); ++i) value[static_cast<std::size_t>(tree.leaves()[i])] = cost[i];
  for (NodeId u : tree.internal_nodes()) value[static_cast<std::size_t>(u)] = combine(tree, u, q, value);
  return value[static_cast<std::size_t>(tree.root())];
}

std::size_t split_count(const WeightedTree& tree, std::span<const double> cost, double kappa, double tau) {
  check_cost(tree, cost);
  const double eps = epsilon_threshold(tree, kappa, tau);
  const double cmax = cost.empty() ? 0.0 : *std::max_element(cost.begin(), cost.end());
  const double pieces = std::ceil(cmax / eps);
  if (pieces > kMaxSplit) throw DomainError("cost too large to split (" + std::to_string(pieces) + " pieces)");
  return static_cast<std::size_t>(pieces);
}

namespace {

std::pair<OnlineState, StepAudit> apply_pieces(const WeightedTree& tree, const OnlineState& state,
                                               std::span<const double> cost, double kappa, std::size_t pieces,
                                               const SubStepObserver& observer) {
  StepAudit audit;
  audit.psi_before = height_potential(tree, state.x);
  audit.Psi_before = psi_aux(tree, state.q, kappa);
  audit.sub_steps = std::max<std::size_t>(pieces, 1);
  audit.beta.assign(tree.node_count(), 0.0);

  OnlineState next = state;
  next.step = state.step + 1;
  if (pieces == 0) {
    audit.psi_after = audit.psi_before;
    audit.Psi_after = audit.Psi_before;
    return {std::move(next), std::move(audit)};
  }

  CostVector piece(cost.begin(), cost.end());
  if (pieces > 1) {
    for (double& c : piece) c /= static_cast<double>(pieces);
  }
  double service_sum = 0.0;
  for (std::size_t k = 0; k < pieces; ++k) {
    UpdateResult upd = apply_update(tree, next.q, piece, kappa);
    MarginalState y = delta_map(tree, upd.p);
    audit.movement += weighted_l1(tree, next.x, y);
    audit.positive_movement += positive_movement(tree, next.x, y);
    service_sum += expected_cost(tree, upd.p, cost);
    for (double a : upd.alpha) audit.max_alpha = std::max(audit.max_alpha, a);
    if (observer) observer(SubStep{k, pieces, next.q, upd, piece});
    if (k + 1 == pieces) audit.beta = upd.beta;
    next.q = std::move(upd.p);
    next.x = std::move(y);
  }
  audit.service = service_sum / static_cast<double>(pieces);
  audit.psi_after = height_potential(tree, next.x);
  audit.Psi_after = psi_aux(tree, next.q, kappa);
  return {std::move(next), std::move(audit)};
}

}  // namespace

std::pair<OnlineState, StepAudit> step(const WeightedTree& tree, const OnlineState& state,
                                       std::span<const double> cost, double kappa) {
  check_cost(tree, cost);
  return apply_pieces(tree, state, cost, kappa, 1, {});
}

std::pair<OnlineState, StepAudit> split_step(const WeightedTree& tree, const OnlineState& state,
                                             std::span<const double> cost, double kappa, double tau,
                                             const SubStepObserver& observer) {
  const std::size_t pieces = split_count(tree, cost, kappa, tau);
  return apply_pieces(tree, state, cost, kappa, pieces, observer);
}

namespace {

void append(Trajectory& traj, OnlineState state, StepAudit audit, CostVector cost) {
  const double s = traj.service() + audit.service;
  const double m = traj.movement() + audit.movement;
  traj.cumulative_service.push_back(s);
  traj.cumulative_movement.push_back(m);
  traj.states.push_back(std::move(state));
  traj.audits.push_back(std::move(audit));
  traj.costs.push_back(std::move(cost));
}

}  // namespace

Trajectory run(const WeightedTree& tree, ConditionalState q0, std::span<const CostVector> costs,
               double kappa, double tau) {
  Trajectory traj;
  traj.kappa = kappa;
  traj.tau = tau;
  traj.states.push_back(make_state(tree, std::move(q0)));
  for (std::size_t t = 0; t < costs.size(); ++t) {
    try {
      auto [next, audit] = split_step(tree, traj.states.back(), costs[t], kappa, tau);
      append(traj, std::move(next), std::move(audit), costs[t]);
    } catch (const DomainError& e) {
      throw DomainError("step " + std::to_string(t + 1) + ": " + e.what());
    }
  }
  return traj;
}

Trajectory run_adaptive(const WeightedTree& tree, ConditionalState q0, CostSource& source,
                        std::size_t horizon, double kappa, double tau) {
  Trajectory traj;
  traj.kappa = kappa;
  traj.tau = tau;
  traj.states.push_back(make_state(tree, std::move(q0)));
  for (std::size_t t = 0; t < horizon; ++t) {
    CostVector c = source.next(tree, traj.states.back());
    try {
      auto [next, audit] = split_step(tree, traj.states.back(), c, kappa, tau);
      append(traj, std::move(next), std::move(audit), std::move(c));
    } catch (const DomainError& e) {
      throw DomainError("step " + std::to_string(t + 1) + ": " + e.what());
    }
  }
  return traj;
}

}  // namespace mts
