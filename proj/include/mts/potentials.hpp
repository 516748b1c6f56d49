#pragma once

// Potential functions of the competitive analysis and certifiers for each
// per-step and cumulative inequality. Every check is a pure function of its
// inputs and reports all of the terms it compared.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mts/online.hpp"
#include "mts/projection.hpp"
#include "mts/tree.hpp"

namespace mts {

// Weight, learning rate and noise of the children of u (q and cost zeroed).
std::vector<ChildTerm> child_terms(const WeightedTree& tree, NodeId u);

// D^(u)(r || p) read from node-indexed conditional vectors.
double node_divergence(const WeightedTree& tree, NodeId u, const ConditionalState& r,
                       const ConditionalState& p, double kappa);

// Global divergence D~(z || q) with the convention 0 ln(0/0 + delta) = 0.
// Throws DomainError when z puts mass under a node that has none.
double global_divergence(const WeightedTree& tree, const MarginalState& z, const ConditionalState& q,
                         double kappa);

// Psi_u(q) = -Delta(q)_u D^(u)(theta || q) and Psi = sum over internal u.
double psi_node(const WeightedTree& tree, NodeId u, const ConditionalState& q, const MarginalState& x,
                double kappa);
double psi_aux(const WeightedTree& tree, const ConditionalState& q, double kappa);

struct Term {
  std::string name;
  double value = 0.0;
};

// lhs <= rhs + tolerance.
struct Certificate {
  std::string check;
  bool certified = true;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  std::vector<Term> terms;

  double slack() const { return rhs - lhs; }
};

// Tolerances scale with 1 + ||c||_inf + max node weight.
double audit_scale(const WeightedTree& tree, std::span<const double> cost);

// <c, y> <= <c, z> + D~(z || q) - D~(z || p).
Certificate check_service_inequality(const WeightedTree& tree, const ConditionalState& q,
                                     const UpdateResult& update, std::span<const double> cost,
                                     const MarginalState& z, double kappa);

// Positive-movement bound, the unconditional movement bound, and (when
// ||c||_inf <= eps_T) the bound charged at the new state. Returns two or three
// certificates in that order.
std::vector<Certificate> check_movement_inequality(const WeightedTree& tree, const ConditionalState& q,
                                                   const UpdateResult& update, std::span<const double> cost,
                                                   double kappa, double tau);

// |D~(z || q) - D~(z' || q)| <= (1/kappa)(2 + 4/tau) ||z - z'||.
Certificate check_lipschitz(const WeightedTree& tree, const ConditionalState& q, const MarginalState& z,
                            const MarginalState& z_prime, double kappa, double tau);

// Per internal node: Psi_u(p) - Psi_u(q) <= (2/kappa)(w_u/tau)(x_u - y_u)_+
//                                          + sum_v (c_v - alpha_v)(x_v - theta_v x_u).
std::vector<Certificate> check_hybrid_cost(const WeightedTree& tree, const ConditionalState& q,
                                           const UpdateResult& update, std::span<const double> cost,
                                           double kappa, double tau);

// sum_{v != root} eta_v x_v c^_v <= (D_T + ln n) <c, x>.
Certificate check_derived_cost_bound(const WeightedTree& tree, const ConditionalState& q,
                                     const UpdateResult& update, std::span<const double> cost);

// alpha_v <= c^_v at every non-root node.
Certificate check_alpha_bound(const WeightedTree& tree, const UpdateResult& update);

// D^(u)(r || p) <= (2/kappa)(w_u/tau) for the children terms of a node with weight w_u.
Certificate check_max_divergence(std::span<const ChildTerm> terms, std::span<const double> r,
                                 std::span<const double> p, double node_weight, double kappa, double tau);

// Cumulative quantities of an online run against one offline comparator.
struct FineInputs {
  double online_service = 0.0;
  double online_movement = 0.0;
  double offline_service = 0.0;
  double offline_movement = 0.0;
  double psi_start = 0.0;  // psi(x_0)
  double psi_end = 0.0;    // psi(x_T)
  double Psi_start = 0.0;  // Psi(q_0)
  double Psi_end = 0.0;    // Psi(q_T)
  double initial_divergence = 0.0;  // D~(z_0 || q_0); zero when both start together
  int depth = 0;
  std::size_t leaves = 0;
  double kappa = 1.0;
  double tau = 7.0;
  double scale = 1.0;
};

struct FineReport {
  Certificate service;   // S_on <= D~(z_0||q_0) + S_off + ((2 + 4/tau)/kappa) M_off
  Certificate movement;  // M_on / kappa <= [psi_T - psi_0] + (4 tau/(tau-3)) ([Psi_0 - Psi_T] + (2D + ln n) S_on)
  double service_ratio = 0.0;   // S_on / (S_off + M_off), zero when the offline cost is zero
  double movement_ratio = 0.0;  // M_on / (kappa S_on), zero when S_on is zero
  double movement_additive = 0.0;  // measured M_on/kappa - (4 tau/(tau-3))(2D + ln n) S_on

  bool certified() const { return service.certified && movement.certified; }
};

FineReport check_fine_competitiveness(const FineInputs& in);

// Summary of one family of checks across a trajectory.
struct CheckSummary {
  std::string check;
  std::size_t count = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
};

struct AuditReport {
  std::vector<CheckSummary> summaries;
  std::vector<Certificate> violations;  // first few, in order of discovery
  FineReport fine;
  FineInputs fine_inputs;
  double max_state_mismatch = 0.0;  // recomputed vs recorded q_t

  std::size_t violation_count() const;
  bool certified() const { return violation_count() == 0 && fine.certified(); }
};

// Replays every (sub-)step of `online` and certifies the per-step bounds with
// the offline comparator z_t (offline_states[t], t = 0..T), the Lipschitz
// bound at each offline move, and the cumulative fine-competitiveness bounds.
// Recorded states must match the replay to 1e-9.
AuditReport audit_trajectory(const WeightedTree& tree, const Trajectory& online,
                             std::span<const MarginalState> offline_states);

}  // namespace mts
