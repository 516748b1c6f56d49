#include <cmath>

#include "doctest.h"
#include "mts/error.hpp"
#include "mts/harness.hpp"
#include "mts/offline.hpp"
#include "oracles.hpp"

using namespace mts;

TEST_CASE("zero costs stay put") {
  const WeightedTree t = star_tree(3, 1.0);
  const std::vector<CostVector> costs(4, CostVector(3, 0.0));
  const OfflineTrajectory off = optimal(t, costs, 2);
  CHECK(off.optimum == 0.0);
  CHECK(off.leaves == std::vector<std::size_t>(5, 2));
}

TEST_CASE("two-leaf example moves immediately") {
  const WeightedTree t = star_tree(2, 1.0);
  const std::vector<CostVector> costs{{5.0, 0.0}, {5.0, 0.0}};
  const OfflineTrajectory off = optimal(t, costs, 0);
  CHECK(off.optimum == 2.0);
  CHECK(off.leaves == std::vector<std::size_t>{0, 1, 1});
  CHECK(off.service == 0.0);
  CHECK(off.movement == 2.0);
  CHECK(off.total() == off.optimum);
}

TEST_CASE("ties prefer staying, then the lowest index") {
  const WeightedTree t = star_tree(3, 1.0);
  // Moving to leaf 1 or 2 costs 2 + 0; staying costs 2.
  const OfflineTrajectory a = optimal(t, std::vector<CostVector>{{2.0, 0.0, 0.0}}, 0);
  CHECK(a.leaves == std::vector<std::size_t>{0, 0});
  const OfflineTrajectory b = optimal(t, std::vector<CostVector>{{3.0, 0.0, 0.0}}, 0);
  CHECK(b.leaves == std::vector<std::size_t>{0, 1});
}

TEST_CASE("decompose") {
  const WeightedTree t = star_tree(2, 1.0);
  const std::vector<CostVector> costs(3, CostVector{1.0, 2.0});
  const Decomposition still = decompose(t, costs, std::vector<std::size_t>{0, 0, 0, 0});
  CHECK(still.movement == 0.0);
  CHECK(still.service == 3.0);
  const Decomposition alt = decompose(t, costs, std::vector<std::size_t>{0, 1, 0, 1});
  CHECK(alt.movement == 6.0);
  CHECK(alt.service == 5.0);
  CHECK_THROWS(decompose(t, costs, std::vector<std::size_t>{0, 1}));

  const auto z = to_marginals(t, std::vector<std::size_t>{0, 1, 0, 1});
  const Decomposition frac = decompose_fractional(t, costs, z);
  CHECK(frac.movement == 6.0);
  CHECK(frac.service == 5.0);
}

TEST_CASE("dynamic program equals exhaustive search") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    RandomHstOptions opt;
    opt.max_leaves = 4;
    opt.max_depth = 2;
    const WeightedTree t = random_hst(rng, opt);
    const std::size_t n = t.leaf_count();
    const std::size_t T = uniform_index(rng, 6);
    std::vector<CostVector> costs(T, CostVector(n));
    for (auto& c : costs)
      for (double& x : c) x = uniform01(rng) < 0.3 ? 0.0 : uniform(rng, 0.0, 2.0);
    const std::size_t start = uniform_index(rng, n);
    const OfflineTrajectory off = optimal(t, costs, start);
    const double brute = oracle::brute_force_optimum(t.leaf_distance_matrix(), n, costs, start);
    CHECK(off.optimum == brute);
    const Decomposition d = decompose(t, costs, off.leaves);
    CHECK(d.total() == doctest::Approx(off.optimum).epsilon(1e-12));
    CHECK(off.total() == doctest::Approx(off.optimum).epsilon(1e-12));
  }
}

TEST_CASE("appending a cost vector never lowers the optimum") {
  Rng rng(8);
  const WeightedTree t = balanced_tree(2, 3, 49.0, 7.0);
  std::vector<CostVector> costs;
  double previous = 0.0;
  for (int s = 0; s < 40; ++s) {
    CostVector c(t.leaf_count());
    for (double& x : c) x = uniform(rng, 0.0, 5.0);
    costs.push_back(c);
    const double now = optimal(t, costs, 0).optimum;
    CHECK(now >= previous);
    previous = now;
  }
}

TEST_CASE("metric DP validates its input") {
  const std::vector<double> d{0, 1, 1, 0};
  CHECK_THROWS_AS(optimal_on_metric(d, 2, std::vector<CostVector>{{1.0, -1.0}}, 0), DomainError);
  CHECK_THROWS_AS(optimal_on_metric(d, 2, std::vector<CostVector>{{1.0}}, 0), DomainError);
  CHECK_THROWS_AS(optimal_on_metric(d, 2, std::vector<CostVector>{}, 5), DomainError);
  CHECK(optimal_on_metric(d, 2, std::vector<CostVector>{{3.0, 0.0}}, 0).optimum == 1.0);
}
