#include <cmath>

#include "doctest.h"
#include "mts/error.hpp"
#include "mts/harness.hpp"
#include "mts/tree.hpp"
#include "oracles.hpp"

using namespace mts;

namespace {

WeightedTree make(std::vector<NodeSpec> specs) { return WeightedTree::build(specs); }

WeightedTree two_star() { return star_tree(2, 1.0); }

}  // namespace

TEST_CASE("canonical ids put children before parents") {
  const WeightedTree t = balanced_tree(2, 2, 7.0, 7.0);
  CHECK(t.node_count() == 7);
  CHECK(t.leaf_count() == 4);
  CHECK(t.root() == 6);
  for (std::size_t u = 0; u + 1 < t.node_count(); ++u) CHECK(t.parent(static_cast<NodeId>(u)) > static_cast<NodeId>(u));
  CHECK(t.depth() == 2);
  CHECK(t.leaves_under(t.root()) == 4);
}

TEST_CASE("structural errors are distinct from HST violations") {
  CHECK_THROWS_AS(make({}), StructureError);
  CHECK_THROWS_AS(make({{"r", std::nullopt, 0, {}}, {"r", "r", 1, {}}}), StructureError);
  CHECK_THROWS_AS(make({{"r", std::nullopt, 0, {}}, {"s", std::nullopt, 0, {}}}), StructureError);
  CHECK_THROWS_AS(make({{"r", std::nullopt, 0, {}}, {"a", "zz", 1, {}}}), StructureError);
  CHECK_THROWS_AS(make({{"r", std::nullopt, 0, {}}, {"a", "r", 0.0, {}}}), StructureError);
  CHECK_THROWS_AS(make({{"r", std::nullopt, 0, {}}, {"a", "r", -1.0, {}}}), StructureError);
  CHECK_THROWS_AS(make({{"r", std::nullopt, 0, {}}, {"x", "y", 1, {}}, {"y", "x", 1, {}}}), StructureError);
  CHECK_THROWS_AS(make({{"r", std::nullopt, 0, {}}, {"a", "r", 1, "L"}, {"b", "r", 1, "L"}}), StructureError);
}

TEST_CASE("validate_tree") {
  CHECK(validate_tree(two_star(), 1.0).empty());
  const WeightedTree chain = make({{"r", std::nullopt, 0, {}}, {"a", "r", 1, {}}, {"leaf", "a", 1, {}}});
  const auto v = validate_tree(chain, 7.0);
  REQUIRE(v.size() == 1);
  CHECK(v[0].parent_id == "a");
  CHECK(v[0].child_id == "leaf");
  CHECK(v[0].ratio == 1.0);
  CHECK(validate_tree(balanced_tree(2, 2, 7.0, 7.0), 7.0).empty());
  CHECK(validate_tree(balanced_tree(2, 2, 7.0, 6.0), 7.0).size() == 4);
}

TEST_CASE("derived parameters") {
  const WeightedTree t = two_star();
  const NodeParams& p = t.params();
  for (NodeId l : t.leaves()) {
    const auto i = static_cast<std::size_t>(l);
    CHECK(p.theta[i] == 0.5);
    CHECK(p.eta[i] == doctest::Approx(1.6931471805599453).epsilon(1e-15));
    CHECK(p.delta[i] == doctest::Approx(0.29530805457482062).epsilon(1e-15));
    CHECK(p.delta[i] <= p.theta[i]);
  }
  // 3 leaves under a node whose parent has 9.
  const WeightedTree b = balanced_tree(3, 2, 7.0, 7.0);
  const NodeId inner = b.parent(b.leaves()[0]);
  CHECK(b.params().theta[static_cast<std::size_t>(inner)] == doctest::Approx(1.0 / 3.0));
  CHECK(b.params().eta[static_cast<std::size_t>(inner)] == doctest::Approx(2.0986122886681098).epsilon(1e-15));
}

TEST_CASE("theta sums to one and eta telescopes to depth plus ln n") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    RandomHstOptions opt;
    opt.max_leaves = 24;
    opt.max_depth = 4;
    opt.unary_prob = 0.2;
    const WeightedTree t = random_hst(rng, opt);
    for (NodeId u : t.internal_nodes()) {
      double s = 0.0;
      for (NodeId v : t.children(u)) s += t.params().theta[static_cast<std::size_t>(v)];
      CHECK(std::abs(s - 1.0) <= 1e-15);
    }
    const double ln_n = std::log(static_cast<double>(t.leaf_count()));
    for (NodeId l : t.leaves()) {
      double s = 0.0;
      for (NodeId v = l; v != t.root(); v = t.parent(v)) s += t.params().eta[static_cast<std::size_t>(v)];
      CHECK(std::abs(s - (t.depth(l) + ln_n)) <= 1e-9);
    }
  }
}

TEST_CASE("delta map") {
  const WeightedTree t = two_star();
  const MarginalState x = delta_map(t, uniform_state(t));
  CHECK(x[t.root()] == 1.0);
  CHECK(x[t.leaves()[0]] == 0.5);
  CHECK(x[t.leaves()[1]] == 0.5);

  const WeightedTree b = balanced_tree(2, 2, 7.0, 7.0);
  const MarginalState u = delta_map(b, uniform_state(b));
  for (NodeId l : b.leaves()) CHECK(u[l] == 0.25);

  ConditionalState q = uniform_state(b);
  const NodeId a = b.parent(b.leaves()[0]);
  for (NodeId s : b.children(b.root())) q[s] = s == a ? 0.0 : 1.0;
  const MarginalState z = delta_map(b, q);
  CHECK(z[a] == 0.0);
  for (NodeId c : b.children(a)) CHECK(z[c] == 0.0);

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto qq = oracle::random_conditional(b, rng, 0.3);
    CHECK(is_marginal_state(b, delta_map(b, qq), 1e-12));
  }
}

TEST_CASE("weighted l1 geometry and the height identity") {
  const WeightedTree t = two_star();
  const MarginalState half = delta_map(t, uniform_state(t));
  CHECK(weighted_l1(t, half, half) == 0.0);
  CHECK(height_potential(t, half) == 1.0);
  const MarginalState x = point_mass(t, 0);
  const MarginalState y = point_mass(t, 1);
  CHECK(weighted_l1(t, x, y) == 2.0);
  CHECK(positive_movement(t, x, y) == 1.0);

  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    RandomHstOptions opt;
    opt.max_depth = 4;
    const WeightedTree r = random_hst(rng, opt);
    const MarginalState a = oracle::random_marginal(r, rng);
    const MarginalState b = oracle::random_marginal(r, rng);
    const double lhs = weighted_l1(r, a, b);
    const double rhs = 2.0 * positive_movement(r, a, b) + height_potential(r, b) - height_potential(r, a);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + lhs));
    CHECK(weighted_l1(r, a, b) == doctest::Approx(weighted_l1(r, b, a)).epsilon(1e-14));
  }
}

TEST_CASE("epsilon threshold") {
  const WeightedTree t = two_star();
  const double e1 = epsilon_threshold(t, 1.0, 7.0);
  CHECK(e1 == doctest::Approx(0.10608936926160919).epsilon(1e-15));
  CHECK(epsilon_threshold(t, 2.0, 7.0) == doctest::Approx(e1 / 2.0).epsilon(1e-15));
  CHECK(epsilon_threshold(t, 1.0, 3.0 + 1e-9) < 1e-9);
  CHECK_THROWS_AS(epsilon_threshold(t, 1.0, 3.0), DomainError);
  CHECK_THROWS_AS(epsilon_threshold(t, 0.5, 7.0), DomainError);
}

TEST_CASE("leaf distances form a metric") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    RandomHstOptions opt;
    opt.max_leaves = 20;
    opt.max_depth = 4;
    const WeightedTree t = random_hst(rng, opt);
    const std::size_t n = t.leaf_count();
    const auto d = t.leaf_distance_matrix();
    for (std::size_t a = 0; a < n; ++a) {
      CHECK(d[a * n + a] == 0.0);
      for (std::size_t b = 0; b < n; ++b) {
        CHECK(d[a * n + b] == d[b * n + a]);
        if (a != b) CHECK(d[a * n + b] > 0.0);
        for (std::size_t c = 0; c < n; ++c) CHECK(d[a * n + c] <= d[a * n + b] + d[b * n + c] + 1e-12);
      }
    }
  }
}

TEST_CASE("specs round-trip to the same canonical ids") {
  Rng rng(21);
  RandomHstOptions opt;
  opt.max_depth = 4;
  opt.max_leaves = 20;
  const WeightedTree t = random_hst(rng, opt);
  const auto specs = t.to_specs();
  const WeightedTree u = WeightedTree::build(specs);
  REQUIRE(u.node_count() == t.node_count());
  for (std::size_t i = 0; i < t.node_count(); ++i) {
    const auto v = static_cast<NodeId>(i);
    CHECK(u.id(v) == t.id(v));
    CHECK(u.weight(v) == t.weight(v));
    CHECK(u.label(v) == t.label(v));
  }
}

TEST_CASE("normalize_exact sums to one in index order") {
  Rng rng(22);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 16);
    std::vector<double> p = oracle::random_simplex(rng, k, 0.3);
    for (double& v : p) v *= uniform(rng, 0.999, 1.001);
    const std::vector<double> before = p;
    normalize_exact(p);
    double s = 0.0;
    for (double v : p) s += v;
    REQUIRE(s == 1.0);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(p[i] >= 0.0);
      CHECK(std::abs(p[i] - before[i]) <= 2e-3);
    }
  }
  std::vector<double> zeros(3, 0.0);
  CHECK_THROWS_AS(normalize_exact(zeros), DomainError);
}

TEST_CASE("theta sums to exactly one under every internal node") {
  Rng rng(23);
  RandomHstOptions opt;
  opt.max_leaves = 40;
  opt.max_children = 9;
  for (int trial = 0; trial < 50; ++trial) {
    const WeightedTree t = random_hst(rng, opt);
    for (NodeId u : t.internal_nodes()) {
      double s = 0.0;
      for (NodeId v : t.children(u)) s += t.params().theta[static_cast<std::size_t>(v)];
      CHECK(s == 1.0);
    }
  }
}
