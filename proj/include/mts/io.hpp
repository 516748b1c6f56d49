#pragma once

// JSON encodings of trees, metrics, cost sequences, trajectories and reports.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mts/continuous.hpp"
#include "mts/embedding.hpp"
#include "mts/offline.hpp"
#include "mts/online.hpp"
#include "mts/potentials.hpp"
#include "mts/reshape.hpp"
#include "mts/tree.hpp"

namespace mts {

using Json = nlohmann::ordered_json;

// Throws ParseError on unreadable files or malformed JSON.
Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

// {"root": id, "nodes": [{"id", "parent", "weight", "label"?}]}; weights may be
// numbers or decimal strings.
WeightedTree tree_from_json(const Json& j);
Json tree_to_json(const WeightedTree& tree);

// {"labels": [...], "dist": [[...]]}
FiniteMetric metric_from_json(const Json& j);
Json metric_to_json(const FiniteMetric& m);

// Either a bare array of per-step arrays in canonical leaf order, or
// {"labels": [...], "costs": [[...]]} with columns named by leaf label.
std::vector<CostVector> costs_from_json(const Json& j, const WeightedTree& tree);
Json costs_to_json(const WeightedTree& tree, const std::vector<CostVector>& costs);

// Self-contained: embeds the tree, costs, kappa and tau, and every q_t.
Json trajectory_to_json(const WeightedTree& tree, const Trajectory& traj);
std::pair<WeightedTree, Trajectory> trajectory_from_json(const Json& j);

Json offline_to_json(const WeightedTree& tree, const OfflineTrajectory& off);
std::vector<std::size_t> offline_leaves_from_json(const Json& j, const WeightedTree& tree);

Json certificate_to_json(const Certificate& c);
Json audit_to_json(const AuditReport& r);
Json reshape_report_to_json(const ReshapeReport& r);
Json violations_to_json(const std::vector<HstViolation>& v);

// {"breaks": [...], "costs": [[...]]} with costs in canonical leaf order or
// keyed by "labels" as for cost files.
CostSchedule schedule_from_json(const Json& j, const WeightedTree& tree);

// Shortest decimal that reads back to the same double.
std::string format_double(double v);

std::string convergence_csv(const ConvergenceStudy& s);

}  // namespace mts
