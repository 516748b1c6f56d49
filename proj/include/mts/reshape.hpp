#pragma once

// Conversion of an HST into a 7-HST with logarithmic depth, uniform leaf
// depth and dominating leaf distances.

#include <cstddef>
#include <cstdint>
#include <utility>

#include "mts/tree.hpp"

namespace mts {

struct ReshapeReport {
  int original_depth = 0;
  int new_depth = 0;
  std::size_t original_nodes = 0;
  std::size_t new_nodes = 0;
  double min_ratio = 1.0;  // min over leaf pairs of d_new / d_old
  double max_ratio = 1.0;
  std::size_t pairs = 0;
  bool exhaustive = true;
  double scale = 1.0;  // power of 7 applied to restore dominance
  bool degenerate = false;
};

// 7^ceil(log_7 w) for w > 0, exact at powers of 7.
double round_up_power7(double w);

// Throws DomainError unless weights are non-increasing along every root-leaf
// path.
std::pair<WeightedTree, ReshapeReport> reshape(const WeightedTree& tree);

// Ratio range of d_reshaped / d_original over leaf pairs matched by label;
// exhaustive up to 512 leaves, sampled with `seed` above. Throws DomainError
// on differing label sets.
ReshapeReport distortion_report(const WeightedTree& original, const WeightedTree& reshaped,
                                std::uint64_t seed = 0);

}  // namespace mts
