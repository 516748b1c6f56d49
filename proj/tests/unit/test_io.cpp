#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "mts/error.hpp"
#include "mts/harness.hpp"
#include "mts/io.hpp"

using namespace mts;

namespace {

const std::string data = MTS_TEST_DATA;

}  // namespace

TEST_CASE("tree files") {
  const WeightedTree s = tree_from_json(read_json_file(data + "/star2.json"));
  CHECK(s.leaf_count() == 2);
  CHECK(s.weight(s.leaves()[1]) == 1.0);
  CHECK(s.label(s.leaves()[1]) == "2");
  CHECK(s.find_leaf("1") == std::size_t{0});

  CHECK_THROWS_AS(tree_from_json(read_json_file(data + "/cycle.json")), StructureError);
  CHECK_THROWS_AS(read_json_file(data + "/missing.json"), ParseError);
  CHECK_THROWS_AS(tree_from_json(Json::parse(R"({"root": "x", "nodes": [{"id": "r", "parent": null}, {"id": "a", "parent": "r", "weight": 1}]})")),
                  StructureError);
  CHECK_THROWS_AS(tree_from_json(Json::parse(R"({"nodes": [{"id": "r", "parent": null}, {"id": "a", "parent": "r", "weight": "1.0x"}]})")),
                  ParseError);
  CHECK_THROWS_AS(tree_from_json(Json::parse(R"({"nodes": 3})")), ParseError);

  Rng rng(2);
  RandomHstOptions opt;
  opt.max_depth = 4;
  const WeightedTree t = random_hst(rng, opt);
  const WeightedTree u = tree_from_json(tree_to_json(t));
  REQUIRE(u.node_count() == t.node_count());
  for (std::size_t i = 0; i < t.node_count(); ++i) {
    CHECK(u.weight(static_cast<NodeId>(i)) == t.weight(static_cast<NodeId>(i)));
    CHECK(u.label(static_cast<NodeId>(i)) == t.label(static_cast<NodeId>(i)));
  }
  CHECK(tree_to_json(u).dump() == tree_to_json(t).dump());
}

TEST_CASE("cost files") {
  const WeightedTree t = tree_from_json(read_json_file(data + "/hst7.json"));
  const auto c = costs_from_json(read_json_file(data + "/costs4.json"), t);
  CHECK(c.size() == 8);
  CHECK(c[1][t.find_leaf("2").value()] == 0.02);
  CHECK(costs_from_json(costs_to_json(t, c), t) == c);
  CHECK(costs_from_json(Json::parse("[[1, 2, 3, 4]]"), t)[0][3] == 4.0);
  CHECK_THROWS_AS(costs_from_json(Json::parse("[[1, 2, 3]]"), t), ParseError);
  CHECK_THROWS_AS(costs_from_json(Json::parse(R"({"labels": ["1", "2", "3", "9"], "costs": [[1, 2, 3, 4]]})"), t),
                  ParseError);
  CHECK_THROWS_AS(costs_from_json(Json::parse(R"({"labels": ["1", "1", "3", "4"], "costs": [[1, 2, 3, 4]]})"), t),
                  ParseError);
}

TEST_CASE("metric files") {
  const FiniteMetric m = metric_from_json(read_json_file(data + "/metric4.json"));
  CHECK(m.size() == 4);
  CHECK_NOTHROW(validate_metric(m));
  const FiniteMetric r = metric_from_json(metric_to_json(m));
  CHECK(r.labels == m.labels);
  CHECK(r.dist == m.dist);
  CHECK_THROWS_AS(metric_from_json(Json::parse(R"({"labels": ["a", "b"], "dist": [[0, 1]]})")), ParseError);
}

TEST_CASE("trajectory and offline round trips") {
  const WeightedTree t = tree_from_json(read_json_file(data + "/hst7.json"));
  const auto c = costs_from_json(read_json_file(data + "/costs4.json"), t);
  const Trajectory traj = run(t, uniform_state(t), c, 1.5, 7.0);
  const Json j = trajectory_to_json(t, traj);
  const auto [t2, back] = trajectory_from_json(Json::parse(j.dump()));
  CHECK(back.kappa == 1.5);
  CHECK(back.costs == traj.costs);
  REQUIRE(back.states.size() == traj.states.size());
  for (std::size_t i = 0; i < traj.states.size(); ++i) CHECK(back.states[i].q.prob == traj.states[i].q.prob);
  CHECK(back.service() == traj.service());
  CHECK(back.movement() == traj.movement());
  CHECK(trajectory_to_json(t2, back).dump() == j.dump());

  const OfflineTrajectory off = optimal(t, c, 2);
  const Json oj = offline_to_json(t, off);
  CHECK(oj["start"] == "3");
  CHECK(offline_leaves_from_json(oj, t) == off.leaves);
  Json bad = oj;
  bad["trajectory"][0] = "zz";
  CHECK_THROWS_AS(offline_leaves_from_json(bad, t), ParseError);
}

TEST_CASE("schedules and reports") {
  const WeightedTree t = tree_from_json(read_json_file(data + "/star2.json"));
  const CostSchedule s = schedule_from_json(read_json_file(data + "/schedule2.json"), t);
  CHECK(s.breaks.empty());
  CHECK(s.at(0.3) == CostVector{1.0, 0.0});
  ConvergenceStudy study;
  study.rows.push_back({8, 0.5, 0.1, 0.0});
  const std::string csv = convergence_csv(study);
  CHECK(csv.rfind("M,distance,max_increment,conservation\n8,0.5,0.1,0\n", 0) == 0);

  const Json v = violations_to_json({{"a", "leaf", 1.0}});
  CHECK(v[0]["parent"] == "a");
  CHECK(reshape_report_to_json(ReshapeReport{})["min_ratio"] == 1.0);
}

TEST_CASE("written files read back") {
  const auto dir = std::filesystem::temp_directory_path() / "mts_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "tree.json").string();
  const WeightedTree t = balanced_tree(2, 2, 7.0, 7.0);
  write_json_file(path, tree_to_json(t));
  CHECK(tree_from_json(read_json_file(path)).node_count() == 7);
  std::filesystem::remove_all(dir);
}
