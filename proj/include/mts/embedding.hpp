#pragma once

// Random dominating tree embeddings of finite metrics (random hierarchical
// decompositions), stretch estimation, earth-mover distances, and the
// end-to-end pipeline for arbitrary metrics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mts/offline.hpp"
#include "mts/online.hpp"
#include "mts/potentials.hpp"
#include "mts/reshape.hpp"
#include "mts/tree.hpp"

namespace mts {

struct FiniteMetric {
  std::vector<std::string> labels;
  std::vector<double> dist;  // row-major n x n

  std::size_t size() const { return labels.size(); }
  double operator()(std::size_t a, std::size_t b) const { return dist[a * labels.size() + b]; }
};

// Symmetry, zero diagonal, positive off-diagonal, triangle inequality (relative
// slack 1e-12), distinct labels. Throws DomainError.
void validate_metric(const FiniteMetric& m);

// Leaf labels equal the point labels. Weights halve per level, so the result
// is an HST. Deterministic in the seed.
WeightedTree frt_embed(const FiniteMetric& m, std::uint64_t seed);

// Leaf index in `tree` of every metric point, matched by label.
std::vector<std::size_t> leaf_map(const FiniteMetric& m, const WeightedTree& tree);

// min over pairs of d_T / d_X.
double min_dominance_ratio(const FiniteMetric& m, const WeightedTree& tree);

struct StretchTable {
  std::size_t samples = 0;
  std::vector<double> mean;  // row-major mean of d_T / d_X, zero on the diagonal
  double max_mean = 0.0;
  std::size_t max_a = 0;
  std::size_t max_b = 0;
};

StretchTable estimate_stretch(const FiniteMetric& m, std::size_t samples, std::uint64_t seed);

// Optimal transport cost between distributions a and b under the metric.
double earth_mover(const FiniteMetric& m, std::span<const double> a, std::span<const double> b);

struct PipelineOptions {
  std::optional<double> kappa;  // default 8 ln n
  double tau = 7.0;
  std::uint64_t seed = 0;
  std::size_t start = 0;        // metric point index
  std::size_t emd_limit = 64;   // exact transport cost up to this many points
};

struct PipelineResult {
  WeightedTree tree;  // reshaped 7-HST
  ReshapeReport reshape;
  double kappa = 1.0;
  Trajectory online;
  OfflineTrajectory offline_tree;
  OfflineTrajectory offline_metric;
  AuditReport audit;
  double service = 0.0;
  double movement_tree = 0.0;  // l1(w) movement on the tree
  std::optional<double> movement_metric;  // exact transport movement under d_X
  double min_dominance = 0.0;  // min d_T'/d_X
};

// costs are indexed by metric point.
PipelineResult general_metric_pipeline(const FiniteMetric& m, std::span<const CostVector> costs,
                                       const PipelineOptions& opt);

double default_kappa(std::size_t points);

}  // namespace mts
