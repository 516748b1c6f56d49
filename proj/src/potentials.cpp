#include "mts/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "mts/error.hpp"

namespace mts {
namespace {

constexpr double kStepTol = 1e-8;
constexpr double kCumulativeTol = 1e-6;
constexpr double kAlphaSlack = 1e-10;
constexpr double kZeroMass = 1e-15;
constexpr double kReplayTol = 1e-9;
constexpr std::size_t kMaxReported = 20;

std::vector<double> gather(const WeightedTree& tree, NodeId u, const ConditionalState& q) {
  std::vector<double> out;
  out.reserve(tree.children(u).size());
  for (NodeId v : tree.children(u)) out.push_back(q[v]);
  return out;
}

Certificate make(std::string name, double lhs, double rhs, double tol, std::vector<Term> terms) {
  Certificate c;
  c.check = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.tolerance = tol;
  c.certified = std::isfinite(lhs) && std::isfinite(rhs) && lhs <= rhs + tol;
  c.terms = std::move(terms);
  return c;
}

double max_entry(std::span<const double> v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, a);
  return m;
}

double log_factor(const WeightedTree& tree) {
  return 2.0 * tree.depth() + std::log(static_cast<double>(tree.leaf_count()));
}

}  // namespace

std::vector<ChildTerm> child_terms(const WeightedTree& tree, NodeId u) {
  std::vector<ChildTerm> out;
  const NodeParams& par = tree.params();
  for (NodeId v : tree.children(u)) {
    const auto vi = static_cast<std::size_t>(v);
    out.push_back({0.0, 0.0, tree.weight(v), par.eta[vi], par.delta[vi]});
  }
  return out;
}

double node_divergence(const WeightedTree& tree, NodeId u, const ConditionalState& r,
                       const ConditionalState& p, double kappa) {
  const auto terms = child_terms(tree, u);
  return node_divergence(terms, gather(tree, u, r), gather(tree, u, p), kappa);
}

double global_divergence(const WeightedTree& tree, const MarginalState& z, const ConditionalState& q,
                         double kappa) {
  const NodeParams& par = tree.params();
  double total = 0.0;
  for (NodeId u : tree.internal_nodes()) {
    const double zu = z[u];
    if (zu <= 0.0) {
      for (NodeId v : tree.children(u)) {
        if (z[v] > kZeroMass) throw DomainError("offline state has mass below a node without mass");
      }
      continue;
    }
    double s = 0.0;
    for (NodeId v : tree.children(u)) {
      const auto vi = static_cast<std::size_t>(v);
      const double ratio = z[v] / zu;
      const double a = ratio + par.delta[vi];
      const double b = q[v] + par.delta[vi];
      s += tree.weight(v) / par.eta[vi] * (a * std::log(a / b) + q[v] - ratio);
    }
    total += zu * s;
  }
  return total / kappa;
}

double psi_node(const WeightedTree& tree, NodeId u, const ConditionalState& q, const MarginalState& x,
                double kappa) {
  if (x[u] == 0.0) return 0.0;
  const ConditionalState theta{tree.params().theta};
  return -x[u] * node_divergence(tree, u, theta, q, kappa);
}

double psi_aux(const WeightedTree& tree, const ConditionalState& q, double kappa) {
  const MarginalState x = delta_map(tree, q);
  const ConditionalState theta{tree.params().theta};
  double s = 0.0;
  for (NodeId u : tree.internal_nodes()) {
    if (x[u] == 0.0) continue;
    s -= x[u] * node_divergence(tree, u, theta, q, kappa);
  }
  return s;
}

double audit_scale(const WeightedTree& tree, std::span<const double> cost) {
  return 1.0 + max_entry(cost) + tree.max_weight();
}

Certificate check_service_inequality(const WeightedTree& tree, const ConditionalState& q,
                                     const UpdateResult& update, std::span<const double> cost,
                                     const MarginalState& z, double kappa) {
  const MarginalState y = delta_map(tree, update.p);
  const double cy = leaf_inner(tree, cost, y);
  const double cz = leaf_inner(tree, cost, z);
  const double before = global_divergence(tree, z, q, kappa);
  const double after = global_divergence(tree, z, update.p, kappa);
  return make("service", cy, cz + before - after, kStepTol * audit_scale(tree, cost),
              {{"online_service", cy}, {"offline_service", cz}, {"divergence_before", before},
               {"divergence_after", after}});
}

std::vector<Certificate> check_movement_inequality(const WeightedTree& tree, const ConditionalState& q,
                                                   const UpdateResult& update, std::span<const double> cost,
                                                   double kappa, double tau) {
  if (!(tau > 3.0)) throw DomainError("movement bounds need tau > 3");
  const MarginalState x = delta_map(tree, q);
  const MarginalState y = delta_map(tree, update.p);
  const double pos = positive_movement(tree, x, y);
  const double mov = weighted_l1(tree, x, y);
  const double cx = leaf_inner(tree, cost, x);
  const double cy = leaf_inner(tree, cost, y);
  const double dPsi = psi_aux(tree, q, kappa) - psi_aux(tree, update.p, kappa);
  const double dpsi = height_potential(tree, y) - height_potential(tree, x);
  const double L = log_factor(tree);
  const double tol = kStepTol * audit_scale(tree, cost);
  const std::vector<Term> terms{{"movement", mov}, {"positive_movement", pos}, {"service_before", cx},
                                {"service_after", cy}, {"Psi_drop", dPsi}, {"psi_change", dpsi},
                                {"log_factor", L}};

  std::vector<Certificate> out;
  out.push_back(make("positive_movement", (tau - 3.0) / (kappa * tau) * pos, L * cx + dPsi, tol, terms));
  out.push_back(make("movement_unsplit", mov / kappa, dpsi / kappa + 2.0 * tau / (tau - 3.0) * (dPsi + L * cx), tol, terms));
  const double eps = epsilon_threshold(tree, kappa, tau);
  if (max_entry(cost) <= eps * (1.0 + 1e-12)) {
    out.push_back(make("movement_split", mov / kappa, dpsi / kappa + 4.0 * tau / (tau - 3.0) * (dPsi + L * cy), tol, terms));
  }
  return out;
}

Certificate check_lipschitz(const WeightedTree& tree, const ConditionalState& q, const MarginalState& z,
                            const MarginalState& z_prime, double kappa, double tau) {
  const double a = global_divergence(tree, z, q, kappa);
  const double b = global_divergence(tree, z_prime, q, kappa);
  const double dist = weighted_l1(tree, z, z_prime);
  const double tol = kStepTol * (1.0 + tree.max_weight());
  return make("lipschitz", std::abs(a - b), (2.0 + 4.0 / tau) / kappa * dist, tol,
              {{"divergence_z", a}, {"divergence_z_prime", b}, {"distance", dist}});
}

std::vector<Certificate> check_hybrid_cost(const WeightedTree& tree, const ConditionalState& q,
                                           const UpdateResult& update, std::span<const double> cost,
                                           double kappa, double tau) {
  const MarginalState x = delta_map(tree, q);
  const MarginalState y = delta_map(tree, update.p);
  const NodeParams& par = tree.params();
  const double tol = kStepTol * audit_scale(tree, cost);
  std::vector<Certificate> out;
  for (NodeId u : tree.internal_nodes()) {
    const double lhs = psi_node(tree, u, update.p, y, kappa) - psi_node(tree, u, q, x, kappa);
    double hybrid = 0.0;
    for (NodeId v : tree.children(u)) {
      const auto vi = static_cast<std::size_t>(v);
      hybrid += (update.derived_cost[vi] - update.alpha[vi]) * (x[v] - par.theta[vi] * x[u]);
    }
    const double move = 2.0 / kappa * tree.weight(u) / tau * std::max(0.0, x[u] - y[u]);
    out.push_back(make("hybrid_cost", lhs, move + hybrid, tol,
                       {{"node", static_cast<double>(u)}, {"movement_term", move}, {"hybrid_term", hybrid}}));
  }
  return out;
}

Certificate check_derived_cost_bound(const WeightedTree& tree, const ConditionalState& q,
                                     const UpdateResult& update, std::span<const double> cost) {
  const MarginalState x = delta_map(tree, q);
  const NodeParams& par = tree.params();
  double lhs = 0.0;
  for (std::size_t v = 0; v + 1 < tree.node_count(); ++v) {
    lhs += par.eta[v] * x.mass[v] * update.derived_cost[v];
  }
  const double cx = leaf_inner(tree, cost, x);
  const double factor = tree.depth() + std::log(static_cast<double>(tree.leaf_count()));
  return make("derived_cost", lhs, factor * cx, kStepTol * audit_scale(tree, cost),
              {{"service_before", cx}, {"factor", factor}});
}

Certificate check_alpha_bound(const WeightedTree& tree, const UpdateResult& update) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v + 1 < tree.node_count(); ++v) {
    worst = std::max(worst, update.alpha[v] - update.derived_cost[v]);
  }
  if (tree.node_count() < 2) worst = 0.0;
  return make("alpha_bound", worst, 0.0, kAlphaSlack, {});
}

Certificate check_max_divergence(std::span<const ChildTerm> terms, std::span<const double> r,
                                 std::span<const double> p, double node_weight, double kappa, double tau) {
  const double d = node_divergence(terms, r, p, kappa);
  return make("max_divergence", d, 2.0 / kappa * node_weight / tau, kStepTol * (1.0 + node_weight),
              {{"node_weight", node_weight}});
}

FineReport check_fine_competitiveness(const FineInputs& in) {
  FineReport r;
  const double tol = kCumulativeTol * in.scale;
  const double lipschitz = (2.0 + 4.0 / in.tau) / in.kappa;
  r.service = make("fine_service", in.online_service,
                   in.initial_divergence + in.offline_service + lipschitz * in.offline_movement, tol,
                   {{"online_service", in.online_service}, {"offline_service", in.offline_service},
                    {"offline_movement", in.offline_movement}, {"initial_divergence", in.initial_divergence}});
  const double L = 2.0 * in.depth + std::log(static_cast<double>(in.leaves));
  const double c = 4.0 * in.tau / (in.tau - 3.0);
  r.movement = make("fine_movement", in.online_movement / in.kappa,
                    (in.psi_end - in.psi_start) / in.kappa + c * ((in.Psi_start - in.Psi_end) + L * in.online_service), tol,
                    {{"online_movement", in.online_movement}, {"online_service", in.online_service},
                     {"psi_change", in.psi_end - in.psi_start}, {"Psi_drop", in.Psi_start - in.Psi_end},
                     {"log_factor", L}});
  const double offline_cost = in.offline_service + in.offline_movement;
  r.service_ratio = offline_cost > 0.0 ? in.online_service / offline_cost : 0.0;
  r.movement_ratio = in.online_service > 0.0 ? in.online_movement / (in.kappa * in.online_service) : 0.0;
  r.movement_additive = in.online_movement / in.kappa - c * L * in.online_service;
  return r;
}

std::size_t AuditReport::violation_count() const {
  std::size_t n = 0;
  for (const CheckSummary& s : summaries) n += s.violations;
  return n;
}

AuditReport audit_trajectory(const WeightedTree& tree, const Trajectory& online,
                             std::span<const MarginalState> offline_states) {
  const std::size_t T = online.horizon();
  if (offline_states.size() != T + 1) {
    throw DomainError("offline trajectory has " + std::to_string(offline_states.size()) +
                      " states, expected " + std::to_string(T + 1));
  }
  for (const MarginalState& z : offline_states) {
    if (!is_marginal_state(tree, z, 1e-9)) throw DomainError("offline state is not in K_T");
  }
  const double kappa = online.kappa;
  const double tau = online.tau;

  AuditReport report;
  std::map<std::string, CheckSummary> by_name;
  std::vector<std::string> order;
  auto record = [&](const Certificate& c) {
    auto [it, inserted] = by_name.try_emplace(c.check);
    CheckSummary& s = it->second;
    if (inserted) {
      s.check = c.check;
      s.min_slack = c.slack();
      order.push_back(c.check);
    }
    ++s.count;
    s.min_slack = std::min(s.min_slack, c.slack());
    if (!c.certified) {
      ++s.violations;
      if (report.violations.size() < kMaxReported) report.violations.push_back(c);
    }
  };

  double max_cost = 0.0;
  double offline_service = 0.0;
  double offline_movement = 0.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const OnlineState& before = online.states[t - 1];
    const CostVector& cost = online.costs[t - 1];
    const MarginalState& z = offline_states[t];
    max_cost = std::max(max_cost, max_entry(cost));
    offline_service += leaf_inner(tree, cost, z);
    offline_movement += weighted_l1(tree, offline_states[t - 1], z);
    record(check_lipschitz(tree, before.q, offline_states[t - 1], z, kappa, tau));

    auto observer = [&](const SubStep& sub) {
      record(check_service_inequality(tree, sub.before, sub.update, sub.cost, z, kappa));
      for (const Certificate& c : check_movement_inequality(tree, sub.before, sub.update, sub.cost, kappa, tau)) {
        record(c);
      }
      for (const Certificate& c : check_hybrid_cost(tree, sub.before, sub.update, sub.cost, kappa, tau)) {
        record(c);
      }
      record(check_derived_cost_bound(tree, sub.before, sub.update, sub.cost));
      record(check_alpha_bound(tree, sub.update));
    };
    auto [replayed, audit] = split_step(tree, before, cost, kappa, tau, observer);
    double mismatch = 0.0;
    for (std::size_t u = 0; u < tree.node_count(); ++u) {
      mismatch = std::max(mismatch, std::abs(replayed.q.prob[u] - online.states[t].q.prob[u]));
    }
    report.max_state_mismatch = std::max(report.max_state_mismatch, mismatch);
    record(make("replay", mismatch, 0.0, kReplayTol, {{"step", static_cast<double>(t)}}));
  }

  FineInputs& fi = report.fine_inputs;
  fi.online_service = online.service();
  fi.online_movement = online.movement();
  fi.offline_service = offline_service;
  fi.offline_movement = offline_movement;
  fi.psi_start = height_potential(tree, online.states.front().x);
  fi.psi_end = height_potential(tree, online.states.back().x);
  fi.Psi_start = psi_aux(tree, online.states.front().q, kappa);
  fi.Psi_end = psi_aux(tree, online.states.back().q, kappa);
  fi.initial_divergence = global_divergence(tree, offline_states.front(), online.states.front().q, kappa);
  fi.depth = tree.depth();
  fi.leaves = tree.leaf_count();
  fi.kappa = kappa;
  fi.tau = tau;
  fi.scale = 1.0 + max_cost + tree.max_weight();
  report.fine = check_fine_competitiveness(fi);

  for (const std::string& name : order) report.summaries.push_back(by_name.at(name));
  return report;
}

}  // namespace mts
