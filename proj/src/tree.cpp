#include "mts/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "mts/error.hpp"

namespace mts {

WeightedTree WeightedTree::build(std::span<const NodeSpec> nodes) {
  if (nodes.empty()) throw StructureError("tree has no nodes");

  std::unordered_map<std::string, std::size_t> input_index;
  input_index.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!input_index.emplace(nodes[i].id, i).second) {
      throw StructureError("duplicate node id '" + nodes[i].id + "'");
    }
  }

  std::optional<std::size_t> root;
  std::vector<std::vector<std::size_t>> kids(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeSpec& n = nodes[i];
    if (!n.parent) {
      if (root) throw StructureError("multiple roots: '" + nodes[*root].id + "' and '" + n.id + "'");
      root = i;
      continue;
    }
    auto it = input_index.find(*n.parent);
    if (it == input_index.end()) {
      throw StructureError("node '" + n.id + "' references unknown parent '" + *n.parent + "'");
    }
    if (it->second == i) throw StructureError("node '" + n.id + "' is its own parent");
    if (!std::isfinite(n.weight) || n.weight <= 0.0) {
      throw StructureError("node '" + n.id + "' has nonpositive or non-finite weight");
    }
    kids[it->second].push_back(i);
  }
  if (!root) throw StructureError("no root (every node has a parent: cycle)");

  // Iterative post-order from the root; anything not reached sits on a cycle.
  std::vector<std::size_t> order;
  order.reserve(nodes.size());
  std::vector<std::pair<std::size_t, std::size_t>> stack{{*root, 0}};
  std::vector<char> seen(nodes.size(), 0);
  seen[*root] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < kids[node].size()) {
      const std::size_t child = kids[node][next++];
      if (seen[child]) throw StructureError("node '" + nodes[child].id + "' reached twice");
      seen[child] = 1;
      stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  if (order.size() != nodes.size()) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!seen[i]) throw StructureError("node '" + nodes[i].id + "' is not connected to the root (cycle)");
    }
  }

  std::vector<NodeId> canon(nodes.size());
  for (std::size_t k = 0; k < order.size(); ++k) canon[order[k]] = static_cast<NodeId>(k);

  WeightedTree t;
  const std::size_t n = nodes.size();
  t.parent_.assign(n, kNoNode);
  t.children_.assign(n, {});
  t.weight_.assign(n, 0.0);
  t.ids_.resize(n);
  t.labels_.resize(n);
  t.depth_.assign(n, 0);
  t.leaves_under_.assign(n, 0);
  t.leaf_index_.assign(n, std::numeric_limits<std::size_t>::max());

  for (std::size_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(canon[i]);
    t.ids_[u] = nodes[i].id;
    if (nodes[i].parent) {
      t.parent_[u] = canon[input_index.at(*nodes[i].parent)];
      t.weight_[u] = nodes[i].weight;
    }
    for (std::size_t k : kids[i]) t.children_[u].push_back(canon[k]);
    t.labels_[u] = kids[i].empty() && nodes[i].label ? *nodes[i].label : nodes[i].id;
  }

  // Parents precede children in reverse id order.
  for (std::size_t r = n; r-- > 0;) {
    if (t.parent_[r] != kNoNode) t.depth_[r] = t.depth_[idx(t.parent_[r])] + 1;
  }
  t.min_leaf_weight_ = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < n; ++u) {
    if (t.children_[u].empty()) {
      t.leaf_index_[u] = t.leaves_.size();
      t.leaves_.push_back(static_cast<NodeId>(u));
      t.leaves_under_[u] = 1;
      if (t.parent_[u] != kNoNode) t.min_leaf_weight_ = std::min(t.min_leaf_weight_, t.weight_[u]);
      t.max_depth_ = std::max(t.max_depth_, t.depth_[u]);
      if (!t.label_to_leaf_.emplace(t.labels_[u], t.leaf_index_[u]).second) {
        throw StructureError("duplicate leaf label '" + t.labels_[u] + "'");
      }
    } else {
      t.internal_.push_back(static_cast<NodeId>(u));
      for (NodeId c : t.children_[u]) t.leaves_under_[u] += t.leaves_under_[idx(c)];
    }
    t.max_weight_ = std::max(t.max_weight_, t.weight_[u]);
  }
  if (!std::isfinite(t.min_leaf_weight_)) t.min_leaf_weight_ = 0.0;
  t.params_ = derive_params(t);
  return t;
}

std::optional<std::size_t> WeightedTree::find_leaf(std::string_view label) const {
  auto it = label_to_leaf_.find(std::string(label));
  if (it == label_to_leaf_.end()) return std::nullopt;
  return it->second;
}

double WeightedTree::leaf_distance(std::size_t a, std::size_t b) const {
  NodeId u = leaves_[a];
  NodeId v = leaves_[b];
  double d = 0.0;
  while (u != v) {
    // Post-order ids: the smaller id cannot be an ancestor of the larger one.
    if (u < v) {
      d += weight_[idx(u)];
      u = parent_[idx(u)];
    } else {
      d += weight_[idx(v)];
      v = parent_[idx(v)];
    }
  }
  return d;
}

std::vector<double> WeightedTree::leaf_distance_matrix() const {
  const std::size_t n = leaves_.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      d[a * n + b] = d[b * n + a] = leaf_distance(a, b);
    }
  }
  return d;
}

std::vector<NodeSpec> WeightedTree::to_specs() const {
  std::vector<NodeSpec> out;
  out.reserve(node_count());
  std::vector<NodeId> stack{root()};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    NodeSpec s;
    s.id = ids_[idx(u)];
    if (parent_[idx(u)] != kNoNode) {
      s.parent = ids_[idx(parent_[idx(u)])];
      s.weight = weight_[idx(u)];
    }
    if (children_[idx(u)].empty() && labels_[idx(u)] != ids_[idx(u)]) s.label = labels_[idx(u)];
    out.push_back(std::move(s));
    const auto& kids = children_[idx(u)];
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<HstViolation> validate_tree(const WeightedTree& tree, double tau) {
  std::vector<HstViolation> out;
  for (NodeId u : tree.internal_nodes()) {
    if (u == tree.root()) continue;
    for (NodeId v : tree.children(u)) {
      const double ratio = tree.weight(v) / tree.weight(u);
      // Powers of 7 below 1 are inexact; allow a few ulps.
      if (tau * tree.weight(v) > tree.weight(u) * (1.0 + 1e-12)) {
        out.push_back({tree.id(u), tree.id(v), ratio});
      }
    }
  }
  return out;
}

NodeParams derive_params(const WeightedTree& tree) {
  const std::size_t n = tree.node_count();
  NodeParams p{std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)};
  for (std::size_t u = 0; u + 1 < n; ++u) {
    const auto v = static_cast<NodeId>(u);
    const double num = static_cast<double>(tree.leaves_under(v));
    const double den = static_cast<double>(tree.leaves_under(tree.parent(v)));
    p.theta[u] = num / den;
    p.eta[u] = 1.0 + std::log(den / num);
  }
  std::vector<double> kids;
  for (NodeId u : tree.internal_nodes()) {
    kids.clear();
    for (NodeId v : tree.children(u)) kids.push_back(p.theta[static_cast<std::size_t>(v)]);
    normalize_exact(kids);
    std::size_t i = 0;
    for (NodeId v : tree.children(u)) p.theta[static_cast<std::size_t>(v)] = kids[i++];
  }
  for (std::size_t u = 0; u + 1 < n; ++u) p.delta[u] = p.theta[u] / p.eta[u];
  return p;
}

void normalize_exact(std::span<double> p) {
  double sum = 0.0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += p[i];
    if (p[i] > p[largest]) largest = i;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw DomainError("cannot normalize a vector without positive finite mass");
  if (sum == 1.0) return;
  for (double& v : p) v /= sum;
  auto ordered_sum = [&] {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  };
  // Walk the largest entry by single ulps while the sum approaches one from
  // the same side.
  double fixed = ordered_sum();
  if (fixed != 1.0) p[largest] += 1.0 - fixed;
  const bool below = (fixed = ordered_sum()) < 1.0;
  for (int step = 0; step < 64 && fixed != 1.0 && (fixed < 1.0) == below; ++step) {
    p[largest] = std::nextafter(p[largest], below ? 2.0 : 0.0);
    fixed = ordered_sum();
  }
  if (fixed == 1.0) return;
  // Otherwise the last positive entry absorbs the residue: with s the ordered
  // sum before it, fl(1 - s) is within 2^-54 of 1 - s, so s + fl(1 - s)
  // rounds to exactly one.
  std::size_t last = p.size();
  while (last > 0 && p[last - 1] == 0.0) --last;
  double before = 0.0;
  for (std::size_t i = 0; i + 1 < last; ++i) before += p[i];
  if (before <= 1.0) p[last - 1] = 1.0 - before;
}

MarginalState delta_map(const WeightedTree& tree, const ConditionalState& q) {
  MarginalState x{std::vector<double>(tree.node_count(), 0.0)};
  x[tree.root()] = 1.0;
  for (std::size_t r = tree.node_count() - 1; r-- > 0;) {
    const auto v = static_cast<NodeId>(r);
    x[v] = x[tree.parent(v)] * q[v];
  }
  return x;
}

bool is_conditional_state(const WeightedTree& tree, const ConditionalState& q, double tol) {
  if (q.prob.size() != tree.node_count()) return false;
  for (NodeId u : tree.internal_nodes()) {
    double s = 0.0;
    for (NodeId v : tree.children(u)) {
      if (!std::isfinite(q[v]) || q[v] < 0.0) return false;
      s += q[v];
    }
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

bool is_marginal_state(const WeightedTree& tree, const MarginalState& x, double tol) {
  if (x.mass.size() != tree.node_count()) return false;
  if (std::abs(x[tree.root()] - 1.0) > tol) return false;
  for (NodeId u : tree.internal_nodes()) {
    double s = 0.0;
    for (NodeId v : tree.children(u)) {
      if (x[v] < -tol) return false;
      s += x[v];
    }
    if (std::abs(s - x[u]) > tol) return false;
  }
  return true;
}

ConditionalState uniform_state(const WeightedTree& tree) {
  ConditionalState q{tree.params().theta};
  q[tree.root()] = 1.0;
  return q;
}

ConditionalState point_mass_state(const WeightedTree& tree, std::size_t leaf_index) {
  ConditionalState q = uniform_state(tree);
  for (NodeId v = tree.leaves()[leaf_index]; v != tree.root(); v = tree.parent(v)) {
    for (NodeId s : tree.children(tree.parent(v))) q[s] = 0.0;
    q[v] = 1.0;
  }
  return q;
}

MarginalState point_mass(const WeightedTree& tree, std::size_t leaf_index) {
  MarginalState x{std::vector<double>(tree.node_count(), 0.0)};
  for (NodeId v = tree.leaves()[leaf_index]; v != kNoNode; v = tree.parent(v)) x[v] = 1.0;
  return x;
}

double weighted_l1(const WeightedTree& tree, const MarginalState& x, const MarginalState& y) {
  double s = 0.0;
  for (std::size_t u = 0; u + 1 < tree.node_count(); ++u) {
    s += tree.weight(static_cast<NodeId>(u)) * std::abs(x.mass[u] - y.mass[u]);
  }
  return s;
}

double positive_movement(const WeightedTree& tree, const MarginalState& x, const MarginalState& y) {
  double s = 0.0;
  for (std::size_t u = 0; u + 1 < tree.node_count(); ++u) {
    s += tree.weight(static_cast<NodeId>(u)) * std::max(0.0, x.mass[u] - y.mass[u]);
  }
  return s;
}

double height_potential(const WeightedTree& tree, const MarginalState& x) {
  double s = 0.0;
  for (std::size_t u = 0; u + 1 < tree.node_count(); ++u) {
    s += tree.weight(static_cast<NodeId>(u)) * x.mass[u];
  }
  return s;
}

double leaf_inner(const WeightedTree& tree, std::span<const double> cost, const MarginalState& x) {
  double s = 0.0;
  const auto leaves = tree.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) s += cost[i] * x[leaves[i]];
  return s;
}

double epsilon_threshold(const WeightedTree& tree, double kappa, double tau) {
  if (!(tau > 3.0)) throw DomainError("epsilon threshold needs tau > 3");
  if (!(kappa >= 1.0)) throw DomainError("kappa must be >= 1");
  const double n = static_cast<double>(tree.leaf_count());
  const double log_term = 2.0 * tree.depth() + std::log(n);
  return tree.min_leaf_weight() / (2.0 * log_term) * (tau - 3.0) / (tau * kappa);
}

}  // namespace mts
