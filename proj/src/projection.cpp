#include "mts/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mts/error.hpp"
#include "mts/tree.hpp"

namespace mts {
namespace {

constexpr double kEquationTol = 1e-13;
constexpr int kMaxBisection = 200;
constexpr double kAlphaClamp = 1e-10;

void check_input(const ProjectionInput& in) {
  if (in.children.empty()) throw DomainError("projection needs at least one child");
  if (!(in.kappa >= 1.0) || !std::isfinite(in.kappa)) throw DomainError("kappa must be finite and >= 1");
  for (const ChildTerm& c : in.children) {
    if (!std::isfinite(c.q) || !std::isfinite(c.cost) || !std::isfinite(c.weight) ||
        !std::isfinite(c.eta) || !std::isfinite(c.delta)) {
      throw DomainError("non-finite projection input");
    }
    if (c.cost < 0.0) throw DomainError("negative derived cost " + std::to_string(c.cost));
    if (c.q < 0.0) throw DomainError("negative prior probability");
    if (c.weight <= 0.0 || c.eta <= 0.0 || c.delta <= 0.0) {
      throw DomainError("weights, learning rates and noise must be positive");
    }
  }
}

// Unclipped coordinate (q+delta) exp(kappa eta (beta - c) / w) - delta.
double raw_coordinate(const ChildTerm& c, double kappa, double beta) {
  return (c.q + c.delta) * std::exp(kappa * c.eta * (beta - c.cost) / c.weight) - c.delta;
}

double mass_at(const ProjectionInput& in, double beta) {
  double s = 0.0;
  for (const ChildTerm& c : in.children) s += std::max(0.0, raw_coordinate(c, in.kappa, beta));
  return s;
}

}  // namespace

ProjectionOutput project_node(const ProjectionInput& in) {
  check_input(in);
  const std::size_t k = in.children.size();
  ProjectionOutput out;
  out.p.assign(k, 0.0);
  out.alpha.assign(k, 0.0);

  if (k == 1) {
    out.p[0] = 1.0;
    out.beta = in.children[0].cost;
    return out;
  }

  const auto [lo_it, hi_it] = std::minmax_element(
      in.children.begin(), in.children.end(),
      [](const ChildTerm& a, const ChildTerm& b) { return a.cost < b.cost; });
  const double max_cost = hi_it->cost;
  if (lo_it->cost == max_cost) {
    // A common shift is absorbed entirely by the simplex multiplier.
    for (std::size_t i = 0; i < k; ++i) out.p[i] = in.children[i].q;
    normalize_exact(out.p);
    out.beta = max_cost;
    return out;
  }

  // g(beta) = mass_at(beta) is nondecreasing with g(0) <= 1 <= g(max_cost).
  double lo = 0.0;
  double hi = max_cost;
  double beta = lo;
  double residual = mass_at(in, lo) - 1.0;
  int it = 0;
  bool converged = std::abs(residual) <= kEquationTol;
  while (!converged && it < kMaxBisection) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++it;
    const double r = mass_at(in, mid) - 1.0;
    if (std::abs(r) <= kEquationTol) {
      beta = mid;
      residual = r;
      converged = true;
    } else if (r < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!converged) {
    // Bracket collapsed to adjacent doubles: keep the better endpoint.
    const double rlo = mass_at(in, lo) - 1.0;
    const double rhi = mass_at(in, hi) - 1.0;
    beta = std::abs(rlo) <= std::abs(rhi) ? lo : hi;
    residual = std::abs(rlo) <= std::abs(rhi) ? rlo : rhi;
  }
  out.beta = beta;
  out.diagnostics.iterations = it;
  out.diagnostics.equation_residual = std::abs(residual);

  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.p[i] = std::max(0.0, raw_coordinate(in.children[i], in.kappa, beta));
    sum += out.p[i];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw SolverError("projection produced no mass");
  out.diagnostics.rescale = 1.0 / sum;
  normalize_exact(out.p);

  for (std::size_t i = 0; i < k; ++i) {
    if (out.p[i] > 0.0) continue;
    const ChildTerm& c = in.children[i];
    double a = c.cost - beta + c.weight / (in.kappa * c.eta) * std::log(c.delta / (c.q + c.delta));
    if (a < 0.0) {
      if (a < -kAlphaClamp * std::max(1.0, c.cost)) {
        throw SolverError("negative nonnegativity multiplier " + std::to_string(a));
      }
      a = 0.0;
    }
    out.alpha[i] = a;
  }
  return out;
}

double kkt_residual(const ProjectionInput& in, const ProjectionOutput& out) {
  double worst = 0.0;
  for (std::size_t i = 0; i < in.children.size(); ++i) {
    const ChildTerm& c = in.children[i];
    const double lhs = c.weight / (in.kappa * c.eta) * std::log((out.p[i] + c.delta) / (c.q + c.delta));
    const double r = std::abs(lhs - out.beta + c.cost - out.alpha[i]) / std::max(1.0, c.cost);
    worst = std::max(worst, r);
  }
  return worst;
}

double node_divergence(std::span<const ChildTerm> terms, std::span<const double> r,
                       std::span<const double> p, double kappa) {
  double s = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const ChildTerm& c = terms[i];
    const double a = r[i] + c.delta;
    const double b = p[i] + c.delta;
    s += c.weight / c.eta * (a * std::log(a / b) + p[i] - r[i]);
  }
  return s / kappa;
}

double projection_objective(const ProjectionInput& in, std::span<const double> p) {
  std::vector<double> q(in.children.size());
  double linear = 0.0;
  for (std::size_t i = 0; i < in.children.size(); ++i) {
    q[i] = in.children[i].q;
    linear += p[i] * in.children[i].cost;
  }
  return node_divergence(in.children, p, q, in.kappa) + linear;
}

}  // namespace mts
