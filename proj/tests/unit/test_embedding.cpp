#include <cmath>

#include "doctest.h"
#include "mts/embedding.hpp"
#include "mts/error.hpp"
#include "mts/harness.hpp"
#include "oracles.hpp"

using namespace mts;

namespace {

FiniteMetric tree_metric(const WeightedTree& t) {
  FiniteMetric m;
  for (NodeId l : t.leaves()) m.labels.push_back(t.label(l));
  m.dist = t.leaf_distance_matrix();
  return m;
}

}  // namespace

TEST_CASE("metric validation") {
  FiniteMetric m = uniform_metric(3);
  CHECK_NOTHROW(validate_metric(m));
  m.dist[1] = 5.0;
  CHECK_THROWS_AS(validate_metric(m), DomainError);
  m.dist[3] = 5.0;  // symmetric now, but 5 > 1 + 1
  CHECK_THROWS_AS(validate_metric(m), DomainError);
  FiniteMetric z = uniform_metric(2);
  z.dist[1] = z.dist[2] = 0.0;
  CHECK_THROWS_AS(validate_metric(z), DomainError);
  FiniteMetric dup = uniform_metric(2);
  dup.labels[1] = dup.labels[0];
  CHECK_THROWS_AS(validate_metric(dup), DomainError);
}

TEST_CASE("small cases") {
  const WeightedTree one = frt_embed(uniform_metric(1), 3);
  CHECK(one.leaf_count() == 1);
  FiniteMetric two = uniform_metric(2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const WeightedTree t = frt_embed(two, seed);
    CHECK(t.leaf_distance(0, 1) >= 1.0);
  }
}

TEST_CASE("dominance on the uniform 4-point metric for 100 seeds") {
  const FiniteMetric m = uniform_metric(4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const WeightedTree t = frt_embed(m, seed);
    CHECK(validate_tree(t, 1.0).empty());
    CHECK(min_dominance_ratio(m, t) >= 1.0);
  }
}

TEST_CASE("embedding is deterministic in the seed and labels are preserved") {
  Rng rng(1);
  const FiniteMetric m = euclidean_metric(12, 2, rng);
  const WeightedTree a = frt_embed(m, 42);
  const WeightedTree b = frt_embed(m, 42);
  REQUIRE(a.node_count() == b.node_count());
  for (std::size_t i = 0; i < a.node_count(); ++i) {
    CHECK(a.weight(static_cast<NodeId>(i)) == b.weight(static_cast<NodeId>(i)));
    CHECK(a.id(static_cast<NodeId>(i)) == b.id(static_cast<NodeId>(i)));
  }
  const auto map = leaf_map(m, a);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(a.label(a.leaves()[map[i]]) == m.labels[i]);
}

TEST_CASE("scaled metrics embed with the scale restored") {
  Rng rng(2);
  FiniteMetric m = euclidean_metric(10, 3, rng);
  for (double& d : m.dist) d *= 1e-3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(min_dominance_ratio(m, frt_embed(m, seed)) >= 1.0);
}

TEST_CASE("stretch estimate") {
  const StretchTable s2 = estimate_stretch(uniform_metric(2), 30, 5);
  CHECK(s2.max_mean >= 1.0);
  CHECK(s2.samples == 30);
  const StretchTable s16 = estimate_stretch(uniform_metric(16), 200, 9);
  CHECK(s16.max_mean <= 4.0 * std::log(16.0));
  CHECK(s16.mean[s16.max_a * 16 + s16.max_b] == s16.max_mean);
}

TEST_CASE("earth mover distance") {
  const FiniteMetric m = uniform_metric(3);
  const std::vector<double> a{1, 0, 0};
  const std::vector<double> b{0, 0.5, 0.5};
  CHECK(earth_mover(m, a, b) == doctest::Approx(1.0));
  CHECK(earth_mover(m, a, a) == 0.0);

  // On a tree metric the transport cost equals the weighted l1 distance of subtree masses.
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    RandomHstOptions opt;
    opt.max_leaves = 10;
    const WeightedTree t = random_hst(rng, opt);
    const FiniteMetric tm = tree_metric(t);
    const auto qa = oracle::random_conditional(t, rng, 0.3);
    const auto qb = oracle::random_conditional(t, rng, 0.3);
    const MarginalState xa = delta_map(t, qa);
    const MarginalState xb = delta_map(t, qb);
    std::vector<double> pa, pb;
    for (NodeId l : t.leaves()) {
      pa.push_back(xa[l]);
      pb.push_back(xb[l]);
    }
    CHECK(earth_mover(tm, pa, pb) == doctest::Approx(weighted_l1(t, xa, xb)).epsilon(1e-9));
  }
}

TEST_CASE("general metric pipeline") {
  const FiniteMetric m = uniform_metric(6);
  PipelineOptions opt;
  opt.seed = 4;
  const std::vector<CostVector> ones(12, CostVector(6, 1.0));
  const PipelineResult r = general_metric_pipeline(m, ones, opt);
  CHECK(r.service == 12.0);
  CHECK(r.movement_tree == 0.0);
  CHECK(r.kappa == doctest::Approx(default_kappa(6)));
  CHECK(r.audit.certified());
  CHECK(r.min_dominance >= 1.0);
  CHECK(validate_tree(r.tree, 7.0).empty());

  Rng rng(10);
  std::vector<CostVector> costs;
  for (int s = 0; s < 25; ++s) {
    CostVector c(6);
    for (double& x : c) x = uniform(rng, 0.0, 1.0);
    costs.push_back(c);
  }
  const PipelineResult p = general_metric_pipeline(m, costs, opt);
  CHECK(p.audit.certified());
  REQUIRE(p.movement_metric.has_value());
  CHECK(*p.movement_metric <= p.movement_tree + 1e-9);
  CHECK(p.offline_metric.optimum <= p.offline_tree.optimum + 1e-9);
}

TEST_CASE("default kappa") {
  CHECK(default_kappa(1) == 1.0);
  CHECK(default_kappa(16) == doctest::Approx(8.0 * std::log(16.0)));
}
