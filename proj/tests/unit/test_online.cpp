#include <cmath>

#include "doctest.h"
#include "mts/error.hpp"
#include "mts/harness.hpp"
#include "mts/online.hpp"
#include "oracles.hpp"

using namespace mts;

TEST_CASE("zero and constant costs leave the state alone") {
  const WeightedTree t = balanced_tree(2, 2, 7.0, 7.0);
  const OnlineState s0 = make_state(t, uniform_state(t));
  const CostVector zero(t.leaf_count(), 0.0);
  const auto [s1, a1] = step(t, s0, zero, 1.0);
  CHECK(s1.q.prob == s0.q.prob);
  CHECK(a1.service == 0.0);
  CHECK(a1.movement == 0.0);

  const CostVector ones(t.leaf_count(), 1.0);
  const auto [s2, a2] = step(t, s0, ones, 1.0);
  CHECK(s2.q.prob == s0.q.prob);
  CHECK(a2.service == 1.0);
  CHECK(a2.movement == 0.0);

  const auto [s3, a3] = split_step(t, s0, zero, 1.0, 7.0);
  CHECK(a3.sub_steps == 1);
  CHECK(s3.q.prob == s0.q.prob);
  CHECK(split_count(t, zero, 1.0, 7.0) == 0);
}

TEST_CASE("two-leaf step") {
  const WeightedTree t = star_tree(2, 1.0);
  const OnlineState s0 = make_state(t, uniform_state(t));
  const CostVector c{0.1, 0.0};
  const auto [s1, a] = step(t, s0, c, 1.0);
  const NodeId l0 = t.leaves()[0];
  CHECK(s1.q[l0] == doctest::Approx(0.43283170597971273).epsilon(1e-12));
  CHECK(a.service == doctest::Approx(0.043283170597971273).epsilon(1e-12));
  CHECK(a.movement == doctest::Approx(0.13433658804057453).epsilon(1e-12));
  CHECK(a.movement == doctest::Approx(2.0 * std::abs(0.5 - s1.q[l0])).epsilon(1e-14));
  CHECK(s1.step == 1);
}

TEST_CASE("split count") {
  const WeightedTree t = star_tree(2, 1.0);
  CHECK(split_count(t, CostVector{1.0, 0.0}, 1.0, 7.0) == 10);
  CHECK(split_count(t, CostVector{0.05, 0.0}, 1.0, 7.0) == 1);
  CHECK(split_count(t, CostVector{1.0, 0.0}, 2.0, 7.0) == 19);
}

TEST_CASE("one level composes exactly under splitting") {
  const WeightedTree t = star_tree(2, 1.0);
  const OnlineState s0 = make_state(t, uniform_state(t));
  const CostVector c{1.0, 0.0};
  const auto [a, aa] = step(t, s0, c, 1.0);
  const auto [b, ba] = split_step(t, s0, c, 1.0, 7.0);
  CHECK(ba.sub_steps == 10);
  CHECK(a.q[t.leaves()[0]] == doctest::Approx(b.q[t.leaves()[0]]).epsilon(1e-12));
}

TEST_CASE("ten pieces against one step on a two-level tree") {
  // kappa divides the divergence, so larger kappa means larger steps and a
  // larger gap between the split and unsplit updates.
  const WeightedTree t = balanced_tree(2, 2, 49.0, 7.0);
  const CostVector c{1.0, 0.0, 0.0, 0.0};
  const CostVector piece{0.1, 0.0, 0.0, 0.0};
  double previous = HUGE_VAL;
  for (double kappa : {16.0, 4.0, 2.0, 1.0}) {
    const ConditionalState a = apply_update(t, uniform_state(t), c, kappa).p;
    ConditionalState b = uniform_state(t);
    for (int i = 0; i < 10; ++i) b = apply_update(t, b, piece, kappa).p;
    double gap = 0.0;
    for (std::size_t u = 0; u < t.node_count(); ++u) gap = std::max(gap, std::abs(a.prob[u] - b.prob[u]));
    CHECK(gap > 0.0);
    CHECK(gap < previous);
    previous = gap;
  }
}

TEST_CASE("runs") {
  const WeightedTree t = balanced_tree(3, 2, 7.0, 7.0);
  const Trajectory empty = run(t, uniform_state(t), std::vector<CostVector>{}, 1.0, 7.0);
  CHECK(empty.horizon() == 0);
  CHECK(empty.service() == 0.0);
  CHECK(empty.movement() == 0.0);
  CHECK(empty.states.size() == 1);

  const std::vector<CostVector> ones(37, CostVector(t.leaf_count(), 1.0));
  const Trajectory r = run(t, point_mass_state(t, 4), ones, 1.0, 7.0);
  CHECK(r.service() == 37.0);
  CHECK(r.movement() == 0.0);

  Rng rng(8);
  std::vector<CostVector> costs;
  for (int i = 0; i < 40; ++i) {
    CostVector c(t.leaf_count());
    for (double& x : c) x = uniform(rng, 0.0, 2.0);
    costs.push_back(c);
  }
  const Trajectory a = run(t, uniform_state(t), costs, 1.5, 7.0);
  const Trajectory b = run(t, uniform_state(t), costs, 1.5, 7.0);
  CHECK(a.states.back().q.prob == b.states.back().q.prob);
  for (std::size_t i = 1; i < a.cumulative_service.size(); ++i) {
    CHECK(a.cumulative_service[i] >= a.cumulative_service[i - 1]);
    CHECK(a.cumulative_movement[i] >= a.cumulative_movement[i - 1]);
  }
  for (const auto& s : a.states) {
    CHECK(is_conditional_state(t, s.q, 1e-10));
    const MarginalState x = delta_map(t, s.q);
    for (std::size_t u = 0; u < t.node_count(); ++u) CHECK(std::abs(x.mass[u] - s.x.mass[u]) <= 1e-10);
  }
}

TEST_CASE("negative and non-finite costs are rejected") {
  const WeightedTree t = star_tree(3, 1.0);
  const OnlineState s0 = make_state(t, uniform_state(t));
  CHECK_THROWS_AS(step(t, s0, CostVector{0.0, -1.0, 0.0}, 1.0), DomainError);
  CHECK_THROWS_AS(step(t, s0, CostVector{0.0, std::nan(""), 0.0}, 1.0), DomainError);
  CHECK_THROWS_AS(run(t, uniform_state(t), std::vector<CostVector>{{1, 1, 1}, {1, -1, 1}}, 1.0, 7.0), DomainError);
}

TEST_CASE("derived costs are conditional expectations") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    RandomHstOptions opt;
    opt.max_depth = 4;
    const WeightedTree t = random_hst(rng, opt);
    const ConditionalState q = oracle::random_conditional(t, rng, 0.2);
    CostVector c(t.leaf_count());
    for (double& x : c) x = uniform(rng, 0.0, 1.0);
    const UpdateResult u = apply_update(t, q, c, 1.0);
    for (NodeId l : t.leaves()) CHECK(u.derived_cost[static_cast<std::size_t>(l)] == c[t.leaf_index(l)]);
    for (NodeId v : t.internal_nodes()) {
      if (v == t.root()) continue;
      double s = 0.0;
      for (NodeId w : t.children(v)) s += u.p[w] * u.derived_cost[static_cast<std::size_t>(w)];
      CHECK(u.derived_cost[static_cast<std::size_t>(v)] == doctest::Approx(s).epsilon(1e-12));
    }
    const MarginalState x = delta_map(t, q);
    CHECK(expected_cost(t, q, c) == doctest::Approx(leaf_inner(t, c, x)).epsilon(1e-12));
  }
}

TEST_CASE("chase adversary on an 8-leaf star") {
  const WeightedTree t = star_tree(8, 1.0);
  ChaseSource chase;
  const Trajectory r = run_adaptive(t, uniform_state(t), chase, 50, 1.0, 7.0);
  CHECK(r.horizon() == 50);
  CHECK(std::isfinite(r.service()));
  CHECK(std::isfinite(r.movement()));
  CHECK(r.service() > 0.0);
  CHECK(r.costs[0][0] == 1.0);
}
