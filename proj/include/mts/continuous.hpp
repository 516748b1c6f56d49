#pragma once

// The regularizer as a function on positive node vectors (value, gradient and
// the nonzero Hessian entries) and refinement studies of the discretized
// dynamics.

#include <cstddef>
#include <span>
#include <vector>

#include "mts/tree.hpp"

namespace mts {

// Node-indexed; the root coordinate is a variable too (its own weight term is
// absent). hess_parent[u] is the mixed entry for u and its parent.
struct RegularizerEval {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> hess_diag;
  std::vector<double> hess_parent;
};

// Throws DomainError unless every coordinate is positive.
double phi(const WeightedTree& tree, std::span<const double> x);
RegularizerEval phi_and_grad(const WeightedTree& tree, std::span<const double> x);

// Piecewise-constant cost path on [0, 1]. breaks holds the interior
// breakpoints, values has one more entry than breaks.
struct CostSchedule {
  std::vector<double> breaks;
  std::vector<CostVector> values;

  const CostVector& at(double t) const;
};

// Discretized dynamics with M sub-steps: q_j = update(q_{j-1}, c((j - 1/2)/M) / M).
std::vector<ConditionalState> discretize(const WeightedTree& tree, const CostSchedule& path,
                                         const ConditionalState& q0, std::size_t M, double kappa);

struct ConvergenceRow {
  std::size_t M = 0;
  double distance = 0.0;       // sup_t |q_(M)(t) - q_(2M)(t)|_inf
  double max_increment = 0.0;  // max_j |q_j - q_{j-1}|_inf at resolution M
  double conservation = 0.0;   // max_{j,u} |sum_{v in children(u)} (q_j - q_{j-1})_v|
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  double slope = 0.0;  // least-squares slope of log distance against log M
};

// M_list must be strictly increasing.
ConvergenceStudy convergence_study(const WeightedTree& tree, const CostSchedule& path,
                                   std::span<const std::size_t> M_list, double kappa,
                                   const ConditionalState& q0);

double loglog_slope(std::span<const ConvergenceRow> rows);

}  // namespace mts
