#include <cmath>

#include "doctest.h"
#include "mts/error.hpp"
#include "mts/harness.hpp"
#include "mts/offline.hpp"
#include "mts/potentials.hpp"
#include "oracles.hpp"

using namespace mts;

namespace {

RandomHstOptions hst_options() {
  RandomHstOptions opt;
  opt.max_leaves = 32;
  opt.max_depth = 5;
  opt.unary_prob = 0.1;
  return opt;
}

CostVector small_cost(const WeightedTree& t, Rng& rng, double kappa) {
  const double eps = epsilon_threshold(t, kappa, 7.0);
  CostVector c(t.leaf_count());
  for (double& x : c) x = uniform01(rng) < 0.3 ? 0.0 : uniform(rng, 0.0, eps);
  return c;
}

}  // namespace

TEST_CASE("global divergence examples") {
  const WeightedTree t = star_tree(2, 1.0);
  const ConditionalState q = uniform_state(t);
  CHECK(global_divergence(t, delta_map(t, q), q, 1.0) == doctest::Approx(0.0).scale(1e-15));
  CHECK(global_divergence(t, point_mass(t, 0), q, 1.0) == doctest::Approx(0.20036840175612320).epsilon(1e-13));
  CHECK(global_divergence(t, point_mass(t, 0), point_mass_state(t, 1), 1.0) ==
        doctest::Approx(0.87321691729902488).epsilon(1e-13));
  CHECK(global_divergence(t, point_mass(t, 0), q, 2.0) == doctest::Approx(0.20036840175612320 / 2).epsilon(1e-13));
}

TEST_CASE("global divergence rejects mass under an empty node") {
  const WeightedTree t = balanced_tree(2, 2, 7.0, 7.0);
  MarginalState z = point_mass(t, 0);
  const NodeId a = t.parent(t.leaves()[0]);
  z[a] = 0.0;
  CHECK_THROWS_AS(global_divergence(t, z, uniform_state(t), 1.0), DomainError);
}

TEST_CASE("global divergence is nonnegative, including degenerate states") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const WeightedTree t = random_hst(rng, hst_options());
    const MarginalState z = oracle::random_marginal(t, rng, 0.4);
    const ConditionalState q = oracle::random_conditional(t, rng, 0.3);
    CHECK(global_divergence(t, z, q, 1.0) >= -1e-12);
  }
}

TEST_CASE("auxiliary potential") {
  const WeightedTree t = star_tree(2, 1.0);
  CHECK(psi_aux(t, uniform_state(t), 1.0) == 0.0);
  ConditionalState q = uniform_state(t);
  q[t.leaves()[0]] = 0.9;
  q[t.leaves()[1]] = 0.1;
  CHECK(psi_aux(t, q, 1.0) == doctest::Approx(-0.13698706542164262).epsilon(1e-13));
  CHECK(psi_aux(t, q, 1.0) == doctest::Approx(-node_divergence(t, t.root(), uniform_state(t), q, 1.0)).epsilon(1e-15));

  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const WeightedTree r = random_hst(rng, hst_options());
    CHECK(psi_aux(r, oracle::random_conditional(r, rng, 0.3), 1.0) <= 1e-12);
    CHECK(psi_aux(r, uniform_state(r), 1.0) == 0.0);
  }
}

TEST_CASE("two-leaf step certificates match a hand evaluation") {
  const WeightedTree t = star_tree(2, 1.0);
  const ConditionalState q = uniform_state(t);
  const CostVector c{0.1, 0.0};
  const UpdateResult u = apply_update(t, q, c, 1.0);
  const MarginalState z = point_mass(t, 1);
  const Certificate s = check_service_inequality(t, q, u, c, z, 1.0);
  CHECK(s.certified);
  const MarginalState y = delta_map(t, u.p);
  CHECK(s.lhs == doctest::Approx(0.1 * y[t.leaves()[0]]).epsilon(1e-14));
  const double rhs = 0.0 + global_divergence(t, z, q, 1.0) - global_divergence(t, z, u.p, 1.0);
  CHECK(s.rhs == doctest::Approx(rhs).epsilon(1e-14));

  const auto m = check_movement_inequality(t, q, u, c, 1.0, 7.0);
  REQUIRE(m.size() == 3);
  for (const auto& cert : m) CHECK(cert.certified);
  // Positive movement of the step: leaf 0 loses 0.5 - 0.43283.
  const double pos = 0.5 - y[t.leaves()[0]];
  const double lhs = (4.0 / 7.0) * pos;
  CHECK(m[0].lhs == doctest::Approx(lhs).epsilon(1e-12));
  const double bound = (2.0 * 1 + std::log(2.0)) * 0.05 + psi_aux(t, q, 1.0) - psi_aux(t, u.p, 1.0);
  CHECK(m[0].rhs == doctest::Approx(bound).epsilon(1e-12));
}

TEST_CASE("zero cost certificates are tight") {
  const WeightedTree t = balanced_tree(2, 2, 7.0, 7.0);
  const ConditionalState q = uniform_state(t);
  const CostVector c(t.leaf_count(), 0.0);
  const UpdateResult u = apply_update(t, q, c, 1.0);
  const Certificate s = check_service_inequality(t, q, u, c, delta_map(t, q), 1.0);
  CHECK(s.lhs == 0.0);
  CHECK(s.rhs == doctest::Approx(0.0).scale(1e-15));
  for (const auto& cert : check_movement_inequality(t, q, u, c, 1.0, 7.0)) {
    CHECK(cert.certified);
    CHECK(cert.lhs == 0.0);
  }
}

TEST_CASE("per-step inequalities on random 7-HSTs") {
  Rng rng(99);
  for (int trial = 0; trial < 400; ++trial) {
    const WeightedTree t = random_hst(rng, hst_options());
    const double kappa = uniform(rng, 1.0, 3.0);
    const ConditionalState q = oracle::random_conditional(t, rng, 0.2);
    const CostVector c = small_cost(t, rng, kappa);
    const UpdateResult u = apply_update(t, q, c, kappa);
    const MarginalState z = oracle::random_marginal(t, rng);
    CHECK(check_service_inequality(t, q, u, c, z, kappa).certified);
    CHECK(check_service_inequality(t, q, u, c, delta_map(t, u.p), kappa).certified);
    const auto m = check_movement_inequality(t, q, u, c, kappa, 7.0);
    CHECK(m.size() == 3);
    for (const auto& cert : m) CHECK(cert.certified);
    for (const auto& cert : check_hybrid_cost(t, q, u, c, kappa, 7.0)) CHECK(cert.certified);
    CHECK(check_derived_cost_bound(t, q, u, c).certified);
    CHECK(check_alpha_bound(t, u).certified);
    const MarginalState z2 = oracle::random_marginal(t, rng);
    CHECK(check_lipschitz(t, q, z, z2, kappa, 7.0).certified);
  }
}

TEST_CASE("large costs skip the small-step bound") {
  const WeightedTree t = star_tree(4, 1.0);
  const ConditionalState q = uniform_state(t);
  const CostVector c{5.0, 0.0, 1.0, 0.0};
  const UpdateResult u = apply_update(t, q, c, 1.0);
  const auto m = check_movement_inequality(t, q, u, c, 1.0, 7.0);
  CHECK(m.size() == 2);
  for (const auto& cert : m) CHECK(cert.certified);
}

TEST_CASE("a forged update is caught") {
  const WeightedTree t = star_tree(2, 1.0);
  const ConditionalState q = uniform_state(t);
  const CostVector c{1.0, 0.0};
  UpdateResult u = apply_update(t, q, c, 1.0);
  u.p[t.leaves()[0]] = 0.9;
  u.p[t.leaves()[1]] = 0.1;
  CHECK_FALSE(check_service_inequality(t, q, u, c, point_mass(t, 1), 1.0).certified);
  u.alpha[static_cast<std::size_t>(t.leaves()[1])] = 5.0;
  CHECK_FALSE(check_alpha_bound(t, u).certified);
}

TEST_CASE("fine competitiveness") {
  FineInputs in;
  in.online_service = 10.0;
  in.offline_service = 10.0;
  in.depth = 1;
  in.leaves = 2;
  CHECK(check_fine_competitiveness(in).certified());
  in.online_service = 11.0;
  CHECK_FALSE(check_fine_competitiveness(in).certified());
  in.offline_movement = 2.0;  // rhs = 10 + (2 + 4/7) * 2
  const FineReport r = check_fine_competitiveness(in);
  CHECK(r.service.certified);
  CHECK(r.service.rhs == doctest::Approx(10.0 + (2.0 + 4.0 / 7.0) * 2.0));
  CHECK(r.service_ratio == doctest::Approx(11.0 / 12.0));
}

TEST_CASE("trajectory audit against the dynamic program") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    RandomHstOptions opt;
    opt.max_depth = 3;
    const WeightedTree t = random_hst(rng, opt);
    std::vector<CostVector> costs;
    for (int s = 0; s < 30; ++s) {
      CostVector c(t.leaf_count());
      for (double& x : c) x = uniform(rng, 0.0, 3.0 * t.min_leaf_weight());
      costs.push_back(c);
    }
    const Trajectory on = run(t, point_mass_state(t, 0), costs, 1.0, 7.0);
    const OfflineTrajectory off = optimal(t, costs, 0);
    const auto z = to_marginals(t, off.leaves);
    const AuditReport a = audit_trajectory(t, on, z);
    CHECK(a.certified());
    CHECK(a.max_state_mismatch <= 1e-9);
    CHECK(a.fine_inputs.initial_divergence == 0.0);

    Trajectory tampered = on;
    tampered.states.back().q.prob[static_cast<std::size_t>(t.leaves()[0])] += 1e-6;
    CHECK_FALSE(audit_trajectory(t, tampered, z).certified());
  }
}

TEST_CASE("audits are reproducible") {
  const WeightedTree t = star_tree(4, 1.0);
  ChaseSource chase;
  const Trajectory on = run_adaptive(t, uniform_state(t), chase, 20, 1.0, 7.0);
  const OfflineTrajectory off = optimal(t, on.costs, 0);
  const auto z = to_marginals(t, off.leaves);
  const AuditReport a = audit_trajectory(t, on, z);
  const AuditReport b = audit_trajectory(t, on, z);
  CHECK(a.certified());
  CHECK(a.fine.service.lhs == b.fine.service.lhs);
  CHECK(a.fine.movement.rhs == b.fine.movement.rhs);
  REQUIRE(a.summaries.size() == b.summaries.size());
  for (std::size_t i = 0; i < a.summaries.size(); ++i) CHECK(a.summaries[i].min_slack == b.summaries[i].min_slack);
}
