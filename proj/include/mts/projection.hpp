#pragma once

// Bregman projection onto one node's child simplex under the shifted-entropy
// divergence
//   D(p || q) = (1/kappa) sum_v (w_v/eta_v) [(p_v+delta_v) ln((p_v+delta_v)/(q_v+delta_v)) + q_v - p_v],
// i.e. argmin_p D(p || q) + <p, c> over the simplex, together with the KKT
// multipliers (beta for the sum constraint, alpha for nonnegativity).

#include <span>
#include <vector>

namespace mts {

struct ChildTerm {
  double q = 0.0;       // prior conditional probability
  double cost = 0.0;    // derived cost, >= 0
  double weight = 1.0;  // w_v
  double eta = 1.0;
  double delta = 0.0;
};

struct ProjectionInput {
  std::vector<ChildTerm> children;
  double kappa = 1.0;
};

struct ProjectionDiagnostics {
  int iterations = 0;
  double equation_residual = 0.0;  // |g(beta) - 1| before renormalization
  double rescale = 1.0;            // factor applied to the positive coordinates
};

struct ProjectionOutput {
  std::vector<double> p;
  std::vector<double> alpha;
  double beta = 0.0;
  ProjectionDiagnostics diagnostics;
};

// Throws DomainError on negative or non-finite input, SolverError if a
// recovered nonnegativity multiplier is significantly negative.
ProjectionOutput project_node(const ProjectionInput& in);

// max_v |(w_v/(kappa eta_v)) ln((p_v+delta_v)/(q_v+delta_v)) - beta + c_v - alpha_v| / max(1, c_v).
double kkt_residual(const ProjectionInput& in, const ProjectionOutput& out);

// D(r || p) for the children of one node; r, p are child-ordered. The q and
// cost fields of `terms` are ignored.
double node_divergence(std::span<const ChildTerm> terms, std::span<const double> r,
                       std::span<const double> p, double kappa);

// Objective D(p || q) + <p, c> of the projection problem.
double projection_objective(const ProjectionInput& in, std::span<const double> p);

}  // namespace mts
