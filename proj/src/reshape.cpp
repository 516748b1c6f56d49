#include "mts/reshape.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mts/error.hpp"
#include "mts/random.hpp"

namespace mts {
namespace {

constexpr std::size_t kExhaustiveLimit = 512;
constexpr std::size_t kSampledPairs = 200000;

// Mutable tree used while contracting. Node 0 is the root.
struct Work {
  struct Node {
    int parent = -1;
    std::vector<int> kids;
    double weight = 0.0;
    std::string id;
    std::string label;
    std::size_t leaves = 0;
    bool alive = true;
  };
  std::vector<Node> nodes;

  bool is_leaf(int u) const { return nodes[static_cast<std::size_t>(u)].kids.empty(); }
  Node& at(int u) { return nodes[static_cast<std::size_t>(u)]; }

  std::vector<int> post_order() const {
    std::vector<int> order;
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      const auto& kids = nodes[static_cast<std::size_t>(u)].kids;
      if (next < kids.size()) {
        const int c = kids[next++];
        stack.emplace_back(c, 0);
      } else {
        order.push_back(u);
        stack.pop_back();
      }
    }
    return order;
  }

  // Removes internal node u; its children take its place under the parent.
  void splice(int u) {
    Node& n = at(u);
    Node& p = at(n.parent);
    auto pos = std::find(p.kids.begin(), p.kids.end(), u);
    pos = p.kids.erase(pos);
    p.kids.insert(pos, n.kids.begin(), n.kids.end());
    for (int c : n.kids) at(c).parent = n.parent;
    n.kids.clear();
    n.alive = false;
  }

  // Leaf u is the only child of its parent: the parent becomes the leaf.
  void absorb_leaf(int u) {
    Node& n = at(u);
    Node& p = at(n.parent);
    p.kids.clear();
    p.label = n.label;
    n.alive = false;
  }
};

Work from_tree(const WeightedTree& tree) {
  Work w;
  const std::size_t n = tree.node_count();
  w.nodes.resize(n);
  // Work index = reversed canonical id, so the root is 0.
  auto map = [n](NodeId u) { return static_cast<int>(n - 1 - static_cast<std::size_t>(u)); };
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = static_cast<NodeId>(i);
    Work::Node& node = w.at(map(u));
    node.parent = tree.parent(u) == kNoNode ? -1 : map(tree.parent(u));
    for (NodeId c : tree.children(u)) node.kids.push_back(map(c));
    node.weight = tree.weight(u);
    node.id = tree.id(u);
    node.label = tree.label(u);
    node.leaves = tree.leaves_under(u);
  }
  return w;
}

std::vector<NodeSpec> to_specs(const Work& w) {
  std::vector<NodeSpec> specs;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    const Work::Node& n = w.nodes[static_cast<std::size_t>(u)];
    NodeSpec s;
    s.id = n.kids.empty() ? n.label : n.id;
    if (n.parent >= 0) {
      const Work::Node& p = w.nodes[static_cast<std::size_t>(n.parent)];
      s.parent = p.id;
      s.weight = n.weight;
    }
    if (n.kids.empty()) s.label = n.label;
    specs.push_back(std::move(s));
    for (auto it = n.kids.rbegin(); it != n.kids.rend(); ++it) stack.push_back(*it);
  }
  return specs;
}

// Ids must stay unique once leaves are renamed to their labels and chain
// nodes are added.
std::string fresh_prefix(const Work& w) {
  std::string prefix = "_";
  auto clashes = [&] {
    for (const Work::Node& n : w.nodes) {
      if (n.label.compare(0, prefix.size(), prefix) == 0) return true;
    }
    return false;
  };
  while (clashes()) prefix += "_";
  return prefix;
}

void assign_internal_ids(Work& w, const std::string& prefix) {
  std::size_t k = 0;
  for (Work::Node& n : w.nodes) {
    if (n.alive && !n.kids.empty()) n.id = prefix + "n" + std::to_string(k++);
  }
}

void check_hst(const WeightedTree& tree) {
  for (NodeId u : tree.internal_nodes()) {
    if (u == tree.root()) continue;
    for (NodeId v : tree.children(u)) {
      if (tree.weight(v) > tree.weight(u)) {
        throw DomainError("not an HST: weight increases from '" + tree.id(u) + "' to '" + tree.id(v) + "'");
      }
    }
  }
}

double max_inverse_ratio(const WeightedTree& original, const WeightedTree& reshaped,
                         const std::vector<std::size_t>& match) {
  double s = 0.0;
  const std::size_t n = original.leaf_count();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      s = std::max(s, original.leaf_distance(a, b) / reshaped.leaf_distance(match[a], match[b]));
    }
  }
  return s;
}

std::vector<std::size_t> match_leaves(const WeightedTree& original, const WeightedTree& reshaped) {
  if (original.leaf_count() != reshaped.leaf_count()) throw DomainError("leaf sets differ in size");
  std::vector<std::size_t> match(original.leaf_count());
  for (std::size_t i = 0; i < original.leaf_count(); ++i) {
    const auto j = reshaped.find_leaf(original.label(original.leaves()[i]));
    if (!j) throw DomainError("leaf '" + original.label(original.leaves()[i]) + "' missing after reshape");
    match[i] = *j;
  }
  return match;
}

// Every reshaped weight is a power of 7 up to rounding drift; pin it to pow(7, k).
double snap_power7(double w) { return std::pow(7.0, std::round(std::log(w) / std::log(7.0))); }

}  // namespace

double round_up_power7(double w) {
  if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("cannot round a nonpositive weight");
  int k = static_cast<int>(std::ceil(std::log(w) / std::log(7.0)));
  while (std::pow(7.0, k) < w) ++k;
  while (std::pow(7.0, k - 1) >= w) --k;
  return std::pow(7.0, k);
}

std::pair<WeightedTree, ReshapeReport> reshape(const WeightedTree& tree) {
  check_hst(tree);
  ReshapeReport report;
  report.original_depth = tree.depth();
  report.original_nodes = tree.node_count();

  Work w = from_tree(tree);
  for (std::size_t i = 1; i < w.nodes.size(); ++i) w.nodes[i].weight = round_up_power7(w.nodes[i].weight);

  // Equal rounded weights on an internal edge below the root.
  for (int u : w.post_order()) {
    const Work::Node& n = w.at(u);
    if (n.parent <= 0 || n.kids.empty()) continue;
    if (n.weight == w.at(n.parent).weight) w.splice(u);
  }

  // Heavy children: more than half of the parent's leaves.
  for (int u : w.post_order()) {
    const Work::Node& n = w.at(u);
    if (n.parent < 0) continue;
    if (2 * n.leaves > w.at(n.parent).leaves) {
      if (n.kids.empty()) {
        w.absorb_leaf(u);
      } else {
        w.splice(u);
      }
    }
  }

  // Leaves too heavy for their parent.
  for (Work::Node& n : w.nodes) {
    if (!n.alive || !n.kids.empty() || n.parent <= 0) continue;
    n.weight = std::min(n.weight, w.at(n.parent).weight / 7.0);
  }

  const std::string prefix = fresh_prefix(w);
  assign_internal_ids(w, prefix);

  // Uniform leaf depth.
  std::vector<int> depth(w.nodes.size(), 0);
  int max_depth = 0;
  std::vector<int> leaves;
  for (int u : w.post_order()) {
    if (w.is_leaf(u) && u != 0) leaves.push_back(u);
  }
  const std::vector<int> order = w.post_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int u = *it;
    if (u != 0) depth[static_cast<std::size_t>(u)] = depth[static_cast<std::size_t>(w.at(u).parent)] + 1;
    max_depth = std::max(max_depth, depth[static_cast<std::size_t>(u)]);
  }
  std::size_t chain = 0;
  for (int leaf : leaves) {
    int d = depth[static_cast<std::size_t>(leaf)];
    if (d == max_depth) continue;
    // The leaf slot becomes the top of a chain; the leaf moves to its bottom.
    int top = leaf;
    const std::string label = w.at(leaf).label;
    double weight = w.at(leaf).weight;
    w.at(top).id = prefix + "c" + std::to_string(chain++);
    while (d < max_depth) {
      weight /= 7.0;
      Work::Node next;
      next.parent = top;
      next.weight = weight;
      next.leaves = 1;
      next.id = prefix + "c" + std::to_string(chain++);
      next.label = label;
      w.nodes.push_back(std::move(next));
      const int id = static_cast<int>(w.nodes.size()) - 1;
      w.at(top).kids.push_back(id);
      top = id;
      ++d;
    }
  }

  std::vector<NodeSpec> specs = to_specs(w);
  for (NodeSpec& spec : specs) {
    if (spec.parent) spec.weight = snap_power7(spec.weight);
  }
  WeightedTree out = WeightedTree::build(specs);
  report.degenerate = tree.leaf_count() < 2;

  if (out.leaf_count() >= 2) {
    const double s = max_inverse_ratio(tree, out, match_leaves(tree, out));
    if (s > 1.0) {
      report.scale = round_up_power7(s);
      for (NodeSpec& spec : specs) {
        if (spec.parent) spec.weight = snap_power7(spec.weight * report.scale);
      }
      out = WeightedTree::build(specs);
    }
  }

  const ReshapeReport d = distortion_report(tree, out);
  report.new_depth = out.depth();
  report.new_nodes = out.node_count();
  report.min_ratio = d.min_ratio;
  report.max_ratio = d.max_ratio;
  report.pairs = d.pairs;
  report.exhaustive = d.exhaustive;
  return {std::move(out), report};
}

ReshapeReport distortion_report(const WeightedTree& original, const WeightedTree& reshaped, std::uint64_t seed) {
  const std::vector<std::size_t> match = match_leaves(original, reshaped);
  ReshapeReport r;
  r.original_depth = original.depth();
  r.new_depth = reshaped.depth();
  r.original_nodes = original.node_count();
  r.new_nodes = reshaped.node_count();
  r.degenerate = original.leaf_count() < 2;
  const std::size_t n = original.leaf_count();
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  auto visit = [&](std::size_t a, std::size_t b) {
    const double ratio = reshaped.leaf_distance(match[a], match[b]) / original.leaf_distance(a, b);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    ++r.pairs;
  };
  if (n <= kExhaustiveLimit) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) visit(a, b);
    }
  } else {
    r.exhaustive = false;
    Rng rng(seed);
    while (r.pairs < kSampledPairs) {
      const std::size_t a = uniform_index(rng, n);
      const std::size_t b = uniform_index(rng, n);
      if (a != b) visit(a, b);
    }
  }
  if (r.pairs == 0) lo = hi = 1.0;
  r.min_ratio = lo;
  r.max_ratio = hi;
  return r;
}

}  // namespace mts
