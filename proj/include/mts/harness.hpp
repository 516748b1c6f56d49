#pragma once

// Instance generators, cost generators and end-to-end experiments that write
// trajectory, offline and audit artifacts plus one ratio-table row.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mts/embedding.hpp"
#include "mts/io.hpp"
#include "mts/online.hpp"
#include "mts/random.hpp"
#include "mts/tree.hpp"

namespace mts {

WeightedTree star_tree(std::size_t leaves, double weight = 1.0);
// Complete tree; level-k nodes weigh top_weight / ratio^k.
WeightedTree balanced_tree(std::size_t branching, int depth, double top_weight, double ratio);

struct RandomHstOptions {
  std::size_t min_leaves = 2;
  std::size_t max_leaves = 16;
  int max_depth = 3;
  std::size_t max_children = 4;
  double top_weight = 1.0;
  double min_ratio = 7.0;  // child weight = parent weight / U[min_ratio, max_ratio]
  double max_ratio = 14.0;
  double unary_prob = 0.0;  // chance an internal node has a single child
};

WeightedTree random_hst(Rng& rng, const RandomHstOptions& opt);

FiniteMetric uniform_metric(std::size_t points);
// Random points in the unit cube with Euclidean distances.
FiniteMetric euclidean_metric(std::size_t points, std::size_t dim, Rng& rng);

struct CostSpec {
  std::string kind = "constant";  // constant | spike | chase | random
  double value = 1.0;             // constant level; chase and random scale
  std::optional<std::string> leaf;  // spike target; random per step if unset
  std::optional<double> spike;    // spike height; default 1e6 * max weight
  double zero_prob = 0.0;         // random: chance an entry is zero
};

// Throws DomainError for chase (adaptive) and unknown kinds.
std::vector<CostVector> generate_costs(const CostSpec& spec, const WeightedTree& tree, std::size_t T,
                                       std::uint64_t seed);

// Unit cost (times scale) on the leaf holding the most online mass. Ties keep
// the previous target if it is among the maxima, else the lowest index.
class ChaseSource : public CostSource {
 public:
  explicit ChaseSource(double scale = 1.0) : scale_(scale) {}
  CostVector next(const WeightedTree& tree, const OnlineState& state) override;

 private:
  double scale_;
  std::optional<std::size_t> last_;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  Json tree;  // {"kind": star | balanced | random_hst | file | metric, ...}
  bool reshape = false;
  CostSpec costs;
  std::size_t horizon = 0;
  std::optional<double> kappa;  // metric trees default to 8 ln n, others to 1
  double tau = 7.0;
  std::optional<std::string> start;  // leaf label, or "uniform"; default first leaf
  std::size_t stretch_samples = 20;
  std::string base_dir = ".";  // for relative file paths
};

// Throws ParseError on missing or malformed fields.
ExperimentConfig config_from_json(const Json& j, const std::string& base_dir = ".");
std::vector<ExperimentConfig> configs_from_json(const Json& j, const std::string& base_dir = ".");

struct RatioRow {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t leaves = 0;
  std::size_t horizon = 0;
  double kappa = 1.0;
  double tau = 7.0;
  double S_on = 0.0;
  double M_on = 0.0;
  double S_off = 0.0;
  double M_off = 0.0;
  double cost_star = 0.0;
  double service_ratio = 0.0;   // S_on / cost*
  double movement_ratio = 0.0;  // M_on / (kappa S_on)
  double service_slack = 0.0;
  double movement_slack = 0.0;
  std::optional<double> max_stretch;
  bool certified = false;
};

std::string ratio_csv_header();
std::string ratio_csv_line(const RatioRow& row);

struct ExperimentResult {
  RatioRow row;
  AuditReport audit;
  Json trajectory;
  Json offline;
  Json audit_json;
};

// Runs every stage in memory; errors carry the stage name.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Writes <out_dir>/<name>/{trajectory,offline,audit}.json.
void write_artifacts(const ExperimentResult& r, const std::string& out_dir);

}  // namespace mts
