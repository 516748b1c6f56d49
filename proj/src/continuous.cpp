#include "mts/continuous.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mts/error.hpp"
#include "mts/online.hpp"

namespace mts {
namespace {

void check_positive(const WeightedTree& tree, std::span<const double> x) {
  if (x.size() != tree.node_count()) throw DomainError("point has the wrong number of coordinates");
  for (double v : x) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("regularizer needs strictly positive coordinates");
  }
}

double interpolate(const std::vector<ConditionalState>& traj, std::size_t M, std::size_t num, std::size_t den,
                   std::size_t u) {
  // Value at t = num/den of the piecewise-linear path through traj[j] at j/M.
  const std::size_t scaled = num * M;
  const std::size_t j = scaled / den;
  const std::size_t rem = scaled % den;
  if (rem == 0) return traj[j].prob[u];
  const double frac = static_cast<double>(rem) / static_cast<double>(den);
  return (1.0 - frac) * traj[j].prob[u] + frac * traj[j + 1].prob[u];
}

}  // namespace

double phi(const WeightedTree& tree, std::span<const double> x) {
  check_positive(tree, x);
  const NodeParams& par = tree.params();
  double s = 0.0;
  for (std::size_t u = 0; u + 1 < tree.node_count(); ++u) {
    const double xp = x[static_cast<std::size_t>(tree.parent(static_cast<NodeId>(u)))];
    const double wn = tree.weight(static_cast<NodeId>(u)) / par.eta[u];
    s += wn * (x[u] + par.delta[u] * xp) * std::log(x[u] / xp + par.delta[u]);
  }
  return s;
}

RegularizerEval phi_and_grad(const WeightedTree& tree, std::span<const double> x) {
  const std::size_t n = tree.node_count();
  RegularizerEval r;
  r.value = phi(tree, x);
  r.grad.assign(n, 0.0);
  r.hess_diag.assign(n, 0.0);
  r.hess_parent.assign(n, 0.0);
  const NodeParams& par = tree.params();
  for (std::size_t u = 0; u + 1 < n; ++u) {
    const auto p = static_cast<std::size_t>(tree.parent(static_cast<NodeId>(u)));
    const double wn = tree.weight(static_cast<NodeId>(u)) / par.eta[u];
    const double ratio = x[u] / x[p];
    const double shifted = x[u] + par.delta[u] * x[p];
    // Own term.
    r.grad[u] += wn * (std::log(ratio + par.delta[u]) + 1.0);
    r.hess_diag[u] += wn / shifted;
    r.hess_parent[u] = -ratio * wn / shifted;
    // Contribution to the parent's coordinate.
    r.grad[p] += wn * (par.delta[u] * std::log(ratio + par.delta[u]) - ratio);
    r.hess_diag[p] += ratio * ratio * wn / shifted;
  }
  return r;
}

const CostVector& CostSchedule::at(double t) const {
  if (values.size() != breaks.size() + 1) throw DomainError("schedule needs one more value than breakpoints");
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
  return values[static_cast<std::size_t>(it - breaks.begin())];
}

std::vector<ConditionalState> discretize(const WeightedTree& tree, const CostSchedule& path,
                                         const ConditionalState& q0, std::size_t M, double kappa) {
  if (M == 0) throw DomainError("resolution must be positive");
  std::vector<ConditionalState> traj;
  traj.reserve(M + 1);
  traj.push_back(q0);
  CostVector piece;
  for (std::size_t j = 1; j <= M; ++j) {
    const double mid = (static_cast<double>(j) - 0.5) / static_cast<double>(M);
    const CostVector& c = path.at(mid);
    piece.assign(c.begin(), c.end());
    for (double& v : piece) v /= static_cast<double>(M);
    traj.push_back(apply_update(tree, traj.back(), piece, kappa).p);
  }
  return traj;
}

double loglog_slope(std::span<const ConvergenceRow> rows) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double k = 0.0;
  for (const ConvergenceRow& r : rows) {
    if (!(r.distance > 0.0)) continue;
    const double lx = std::log(static_cast<double>(r.M));
    const double ly = std::log(r.distance);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    k += 1.0;
  }
  if (k < 2.0) return 0.0;
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

ConvergenceStudy convergence_study(const WeightedTree& tree, const CostSchedule& path,
                                   std::span<const std::size_t> M_list, double kappa,
                                   const ConditionalState& q0) {
  if (!is_conditional_state(tree, q0)) throw DomainError("initial state is not in Q_T");
  for (std::size_t i = 0; i < M_list.size(); ++i) {
    if (M_list[i] == 0 || (i > 0 && M_list[i] <= M_list[i - 1])) {
      throw DomainError("resolutions must be positive and strictly increasing");
    }
  }
  std::set<std::size_t> needed;
  for (std::size_t M : M_list) {
    needed.insert(M);
    needed.insert(2 * M);
  }
  std::map<std::size_t, std::vector<ConditionalState>> runs;
  for (std::size_t M : needed) runs.emplace(M, discretize(tree, path, q0, M, kappa));

  const std::size_t n = tree.node_count();
  ConvergenceStudy study;
  for (std::size_t M : M_list) {
    const auto& coarse = runs.at(M);
    const auto& fine = runs.at(2 * M);
    ConvergenceRow row;
    row.M = M;
    for (std::size_t j = 0; j <= 2 * M; ++j) {
      for (std::size_t u = 0; u < n; ++u) {
        row.distance = std::max(row.distance, std::abs(interpolate(coarse, M, j, 2 * M, u) - fine[j].prob[u]));
      }
    }
    for (std::size_t j = 1; j <= M; ++j) {
      for (std::size_t u = 0; u < n; ++u) {
        row.max_increment = std::max(row.max_increment, std::abs(coarse[j].prob[u] - coarse[j - 1].prob[u]));
      }
      for (NodeId u : tree.internal_nodes()) {
        double s = 0.0;
        for (NodeId v : tree.children(u)) s += coarse[j][v] - coarse[j - 1][v];
        row.conservation = std::max(row.conservation, std::abs(s));
      }
    }
    study.rows.push_back(row);
  }
  study.slope = loglog_slope(study.rows);
  return study;
}

}  // namespace mts
