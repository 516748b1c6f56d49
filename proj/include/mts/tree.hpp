#pragma once

// Vertex-weighted rooted trees (HST metrics), their derived per-node
// parameters, the map from conditional probabilities to subtree masses, and
// the weighted l1 geometry on subtree-mass vectors.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mts {

// Dense node index. Nodes are numbered in canonical post-order: every child
// precedes its parent and the root is the last node.
using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

// One node as it appears in a tree file.
struct NodeSpec {
  std::string id;
  std::optional<std::string> parent;  // nullopt for the root
  double weight = 0.0;                // ignored at the root
  std::optional<std::string> label;   // leaves only; defaults to id
};

// Per-node learning-rate parameters. Entries at the root are placeholders
// (theta = eta = 1, delta = 0) and never read by the algorithms.
struct NodeParams {
  std::vector<double> theta;
  std::vector<double> eta;
  std::vector<double> delta;
};

// Subtree masses x_u; x_root = 1 and x_u = sum over children.
struct MarginalState {
  std::vector<double> mass;
  double operator[](NodeId u) const { return mass[static_cast<std::size_t>(u)]; }
  double& operator[](NodeId u) { return mass[static_cast<std::size_t>(u)]; }
};

// Conditional probabilities q_v of entering child v from its parent. The root
// entry is fixed at 1.
struct ConditionalState {
  std::vector<double> prob;
  double operator[](NodeId u) const { return prob[static_cast<std::size_t>(u)]; }
  double& operator[](NodeId u) { return prob[static_cast<std::size_t>(u)]; }
};

// Per-leaf cost for one time step, indexed by canonical leaf index.
using CostVector = std::vector<double>;

struct HstViolation {
  std::string parent_id;
  std::string child_id;
  double ratio = 0.0;  // w_child / w_parent
};

class WeightedTree {
 public:
  // Validates structure and assigns canonical ids. Children keep the order in
  // which they appear in `nodes`. Throws StructureError.
  static WeightedTree build(std::span<const NodeSpec> nodes);

  std::size_t node_count() const { return parent_.size(); }
  std::size_t leaf_count() const { return leaves_.size(); }
  NodeId root() const { return static_cast<NodeId>(parent_.size()) - 1; }

  NodeId parent(NodeId u) const { return parent_[idx(u)]; }
  std::span<const NodeId> children(NodeId u) const { return children_[idx(u)]; }
  bool is_leaf(NodeId u) const { return children_[idx(u)].empty(); }
  double weight(NodeId u) const { return weight_[idx(u)]; }
  const std::string& id(NodeId u) const { return ids_[idx(u)]; }
  // External label of a leaf (the id for internal nodes).
  const std::string& label(NodeId u) const { return labels_[idx(u)]; }

  // Leaves in canonical order; cost vectors and leaf states use this order.
  std::span<const NodeId> leaves() const { return leaves_; }
  std::size_t leaf_index(NodeId leaf) const { return leaf_index_[idx(leaf)]; }
  std::optional<std::size_t> find_leaf(std::string_view label) const;

  // Internal nodes, children before parents (root last).
  std::span<const NodeId> internal_nodes() const { return internal_; }

  // Combinatorial depth of the tree and of a node (root has depth 0).
  int depth() const { return max_depth_; }
  int depth(NodeId u) const { return depth_[idx(u)]; }
  std::size_t leaves_under(NodeId u) const { return leaves_under_[idx(u)]; }

  const NodeParams& params() const { return params_; }
  double min_leaf_weight() const { return min_leaf_weight_; }
  double max_weight() const { return max_weight_; }

  // Tree path metric between two leaves given by canonical leaf index.
  double leaf_distance(std::size_t a, std::size_t b) const;
  // Row-major n x n matrix of leaf_distance.
  std::vector<double> leaf_distance_matrix() const;

  // Node specs in pre-order (root first, children in order); building from
  // them reproduces the same canonical ids.
  std::vector<NodeSpec> to_specs() const;

 private:
  static std::size_t idx(NodeId u) { return static_cast<std::size_t>(u); }

  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<double> weight_;
  std::vector<std::string> ids_;
  std::vector<std::string> labels_;
  std::vector<int> depth_;
  std::vector<std::size_t> leaves_under_;
  std::vector<NodeId> leaves_;
  std::vector<std::size_t> leaf_index_;
  std::vector<NodeId> internal_;
  std::unordered_map<std::string, std::size_t> label_to_leaf_;
  NodeParams params_;
  int max_depth_ = 0;
  double min_leaf_weight_ = 0.0;
  double max_weight_ = 0.0;
};

// Empty iff every parent/child edge below the root satisfies
// w_child <= w_parent / tau (relative slack 1e-12). tau = 1 checks the plain
// HST property.
std::vector<HstViolation> validate_tree(const WeightedTree& tree, double tau);

// theta_u = |L_u| / |L_p(u)|, eta_u = 1 + ln(1/theta_u), delta_u = theta_u / eta_u.
NodeParams derive_params(const WeightedTree& tree);

MarginalState delta_map(const WeightedTree& tree, const ConditionalState& q);

// Checks the simplex constraint at every internal node and nonnegativity.
bool is_conditional_state(const WeightedTree& tree, const ConditionalState& q, double tol = 1e-10);
bool is_marginal_state(const WeightedTree& tree, const MarginalState& x, double tol = 1e-10);

// Scales p to unit mass, then moves single entries by a few ulps until the
// sum in index order is exactly one. Throws DomainError without positive
// finite mass.
void normalize_exact(std::span<double> p);

// q = theta: the uniform distribution over leaves.
ConditionalState uniform_state(const WeightedTree& tree);
// All mass on one leaf; off-path nodes keep theta so q stays in Q_T.
ConditionalState point_mass_state(const WeightedTree& tree, std::size_t leaf_index);
MarginalState point_mass(const WeightedTree& tree, std::size_t leaf_index);

// Sum over non-root u of w_u |x_u - y_u|.
double weighted_l1(const WeightedTree& tree, const MarginalState& x, const MarginalState& y);
// Sum over non-root u of w_u (x_u - y_u)_+.
double positive_movement(const WeightedTree& tree, const MarginalState& x, const MarginalState& y);
// psi(x) = sum over non-root u of w_u x_u.
double height_potential(const WeightedTree& tree, const MarginalState& x);

// <c, x>_L restricted to leaves.
double leaf_inner(const WeightedTree& tree, std::span<const double> cost, const MarginalState& x);

// Per-piece cost cap w_min / (2 (2 D_T + ln n)) * (tau - 3) / (tau kappa).
// Throws DomainError unless tau > 3 and kappa >= 1.
double epsilon_threshold(const WeightedTree& tree, double kappa, double tau);

}  // namespace mts
