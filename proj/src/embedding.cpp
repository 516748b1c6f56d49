#include "mts/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "mts/error.hpp"
#include "mts/random.hpp"

namespace mts {

void validate_metric(const FiniteMetric& m) {
  const std::size_t n = m.size();
  if (n == 0) throw DomainError("metric has no points");
  if (m.dist.size() != n * n) throw DomainError("distance matrix is not " + std::to_string(n) + " x " + std::to_string(n));
  std::unordered_set<std::string> seen;
  for (const std::string& l : m.labels) {
    if (!seen.insert(l).second) throw DomainError("duplicate point label '" + l + "'");
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (m(a, a) != 0.0) throw DomainError("nonzero diagonal at '" + m.labels[a] + "'");
    for (std::size_t b = 0; b < n; ++b) {
      const double d = m(a, b);
      if (!std::isfinite(d)) throw DomainError("non-finite distance");
      if (d != m(b, a)) throw DomainError("asymmetric distance between '" + m.labels[a] + "' and '" + m.labels[b] + "'");
      if (a != b && !(d > 0.0)) throw DomainError("distinct points '" + m.labels[a] + "' and '" + m.labels[b] + "' at distance 0");
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t c = 0; c < n; ++c) {
        if (m(a, c) > (m(a, b) + m(b, c)) * (1.0 + 1e-12)) {
          throw DomainError("triangle inequality fails for '" + m.labels[a] + "', '" + m.labels[b] + "', '" +
                            m.labels[c] + "'");
        }
      }
    }
  }
}

namespace {

struct Cluster {
  int parent = -1;
  double weight = 0.0;
  std::vector<std::size_t> points;
  std::vector<int> kids;
};

std::string fresh_prefix(const FiniteMetric& m) {
  std::string prefix = "_";
  auto clashes = [&] {
    for (const std::string& l : m.labels) {
      if (l.compare(0, prefix.size(), prefix) == 0) return true;
    }
    return false;
  };
  while (clashes()) prefix += "_";
  return prefix;
}

}  // namespace

WeightedTree frt_embed(const FiniteMetric& m, std::uint64_t seed) {
  validate_metric(m);
  const std::size_t n = m.size();
  const std::string prefix = fresh_prefix(m);
  if (n == 1) {
    const std::vector<NodeSpec> specs{{prefix + "root", std::nullopt, 0.0, std::nullopt},
                                      {m.labels[0], prefix + "root", 1.0, m.labels[0]}};
    return WeightedTree::build(specs);
  }

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      dmin = std::min(dmin, m(a, b));
      dmax = std::max(dmax, m(a, b));
    }
  }
  const double diameter = dmax / dmin;

  Rng rng(seed);
  const double beta = std::exp2(uniform01(rng));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);

  int top = 0;
  while (std::ldexp(1.0, top) < diameter) ++top;

  std::vector<Cluster> nodes(1);
  nodes[0].points.resize(n);
  std::iota(nodes[0].points.begin(), nodes[0].points.end(), 0);
  std::vector<int> frontier{0};
  for (int level = top - 1; level >= -1; --level) {
    const double radius = beta * std::ldexp(1.0, level);
    const double weight = beta * std::ldexp(1.0, level + 1);
    std::vector<int> next;
    for (int c : frontier) {
      const std::vector<std::size_t> pts = nodes[static_cast<std::size_t>(c)].points;
      std::vector<char> taken(pts.size(), 0);
      for (std::size_t center : perm) {
        Cluster part;
        part.parent = c;
        part.weight = weight;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (!taken[i] && m(center, pts[i]) / dmin <= radius) {
            taken[i] = 1;
            part.points.push_back(pts[i]);
          }
        }
        if (part.points.empty()) continue;
        nodes.push_back(std::move(part));
        const int id = static_cast<int>(nodes.size()) - 1;
        nodes[static_cast<std::size_t>(c)].kids.push_back(id);
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }

  // Unary chains collapse into their top node; weights add up so distances
  // are unchanged. Below the root the child's weight never counts.
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    Cluster& c = nodes[u];
    while (c.kids.size() == 1) {
      Cluster& only = nodes[static_cast<std::size_t>(c.kids.front())];
      if (u != 0) c.weight += only.weight;
      std::vector<int> grand = std::move(only.kids);
      only.kids.clear();
      c.kids = std::move(grand);
    }
  }

  std::vector<NodeSpec> specs;
  std::size_t k = 0;
  std::vector<std::pair<int, std::string>> stack{{0, ""}};
  while (!stack.empty()) {
    auto [u, parent] = std::move(stack.back());
    stack.pop_back();
    const Cluster& c = nodes[static_cast<std::size_t>(u)];
    NodeSpec s;
    if (c.kids.empty()) {
      s.id = m.labels[c.points.front()];
      s.label = s.id;
    } else {
      s.id = prefix + "f" + std::to_string(k++);
    }
    if (u != 0) {
      s.parent = parent;
      s.weight = c.weight * dmin;
    }
    for (auto it = c.kids.rbegin(); it != c.kids.rend(); ++it) stack.emplace_back(*it, s.id);
    specs.push_back(std::move(s));
  }
  return WeightedTree::build(specs);
}

std::vector<std::size_t> leaf_map(const FiniteMetric& m, const WeightedTree& tree) {
  if (tree.leaf_count() != m.size()) throw DomainError("tree and metric have different point counts");
  std::vector<std::size_t> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto leaf = tree.find_leaf(m.labels[i]);
    if (!leaf) throw DomainError("point '" + m.labels[i] + "' is not a leaf of the tree");
    out[i] = *leaf;
  }
  return out;
}

double min_dominance_ratio(const FiniteMetric& m, const WeightedTree& tree) {
  const std::vector<std::size_t> map = leaf_map(m, tree);
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = a + 1; b < m.size(); ++b) {
      r = std::min(r, tree.leaf_distance(map[a], map[b]) / m(a, b));
    }
  }
  return m.size() < 2 ? 1.0 : r;
}

StretchTable estimate_stretch(const FiniteMetric& m, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw DomainError("stretch estimate needs at least one sample");
  const std::size_t n = m.size();
  StretchTable t;
  t.samples = samples;
  t.mean.assign(n * n, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    const WeightedTree tree = frt_embed(m, derive_seed(seed, s));
    const std::vector<std::size_t> map = leaf_map(m, tree);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        t.mean[a * n + b] += tree.leaf_distance(map[a], map[b]) / m(a, b);
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = t.mean[a * n + b] / static_cast<double>(samples);
      t.mean[a * n + b] = t.mean[b * n + a] = v;
      if (v > t.max_mean) {
        t.max_mean = v;
        t.max_a = a;
        t.max_b = b;
      }
    }
  }
  return t;
}

namespace {

// Successive shortest paths (Bellman-Ford) on a transportation network with
// real capacities.
class FlowNetwork {
 public:
  explicit FlowNetwork(std::size_t nodes) : adj_(nodes) {}

  void add(std::size_t from, std::size_t to, double cap, double cost) {
    adj_[from].push_back(edges_.size());
    edges_.push_back({to, cap, cost});
    adj_[to].push_back(edges_.size());
    edges_.push_back({from, 0.0, -cost});
  }

  double min_cost(std::size_t s, std::size_t t, double eps) {
    const std::size_t n = adj_.size();
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    std::vector<double> dist(n);
    std::vector<std::size_t> via(n);
    for (;;) {
      std::fill(dist.begin(), dist.end(), inf);
      dist[s] = 0.0;
      for (std::size_t round = 0; round < n; ++round) {
        bool changed = false;
        for (std::size_t u = 0; u < n; ++u) {
          if (dist[u] == inf) continue;
          for (std::size_t e : adj_[u]) {
            const Edge& ed = edges_[e];
            if (ed.cap > eps && dist[u] + ed.cost < dist[ed.to] - 1e-15) {
              dist[ed.to] = dist[u] + ed.cost;
              via[ed.to] = e;
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (dist[t] == inf) break;
      double push = inf;
      for (std::size_t v = t; v != s; v = edges_[via[v] ^ 1].to) push = std::min(push, edges_[via[v]].cap);
      for (std::size_t v = t; v != s; v = edges_[via[v] ^ 1].to) {
        edges_[via[v]].cap -= push;
        edges_[via[v] ^ 1].cap += push;
      }
      total += push * dist[t];
    }
    return total;
  }

 private:
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
  };
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Edge> edges_;
};

}  // namespace

double earth_mover(const FiniteMetric& m, std::span<const double> a, std::span<const double> b) {
  const std::size_t n = m.size();
  if (a.size() != n || b.size() != n) throw DomainError("distribution size does not match the metric");
  std::vector<double> supply(n);
  std::vector<double> demand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double common = std::min(a[i], b[i]);
    supply[i] = a[i] - common;
    demand[i] = b[i] - common;
  }
  FlowNetwork net(2 * n + 2);
  const std::size_t s = 2 * n;
  const std::size_t t = 2 * n + 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (supply[i] > 0.0) net.add(s, i, supply[i], 0.0);
    if (demand[i] > 0.0) net.add(n + i, t, demand[i], 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(supply[i] > 0.0)) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (demand[j] > 0.0) net.add(i, n + j, std::numeric_limits<double>::infinity(), m(i, j));
    }
  }
  return net.min_cost(s, t, 1e-15);
}

double default_kappa(std::size_t points) {
  return std::max(1.0, 8.0 * std::log(static_cast<double>(points)));
}

PipelineResult general_metric_pipeline(const FiniteMetric& m, std::span<const CostVector> costs,
                                       const PipelineOptions& opt) {
  validate_metric(m);
  const std::size_t n = m.size();
  if (n < 2) throw DomainError("pipeline needs at least two points");
  if (opt.start >= n) throw DomainError("start point out of range");

  const WeightedTree sampled = frt_embed(m, derive_seed(opt.seed, 0));
  auto [tree, report] = reshape(sampled);
  const std::vector<std::size_t> map = leaf_map(m, tree);

  std::vector<CostVector> tree_costs;
  tree_costs.reserve(costs.size());
  for (const CostVector& c : costs) {
    if (c.size() != n) throw DomainError("cost vector size does not match the metric");
    CostVector tc(n);
    for (std::size_t i = 0; i < n; ++i) tc[map[i]] = c[i];
    tree_costs.push_back(std::move(tc));
  }

  PipelineResult r;
  r.tree = std::move(tree);
  r.reshape = report;
  r.kappa = opt.kappa ? *opt.kappa : default_kappa(n);
  r.online = run(r.tree, point_mass_state(r.tree, map[opt.start]), tree_costs, r.kappa, opt.tau);
  r.offline_tree = optimal(r.tree, tree_costs, map[opt.start]);
  const std::vector<MarginalState> z = to_marginals(r.tree, r.offline_tree.leaves);
  r.audit = audit_trajectory(r.tree, r.online, z);
  r.offline_metric = optimal_on_metric(m.dist, n, costs, opt.start);
  r.service = r.online.service();
  r.movement_tree = r.online.movement();
  r.min_dominance = min_dominance_ratio(m, r.tree);

  if (n <= opt.emd_limit) {
    auto on_points = [&](const OnlineState& s) {
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = s.x[r.tree.leaves()[map[i]]];
      return d;
    };
    double moved = 0.0;
    std::vector<double> prev = on_points(r.online.states.front());
    for (std::size_t t = 1; t < r.online.states.size(); ++t) {
      std::vector<double> cur = on_points(r.online.states[t]);
      moved += earth_mover(m, prev, cur);
      prev = std::move(cur);
    }
    r.movement_metric = moved;
  }
  return r;
}

}  // namespace mts
