#include "mts/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "mts/error.hpp"
#include "mts/offline.hpp"
#include "mts/potentials.hpp"
#include "mts/reshape.hpp"

namespace mts {

WeightedTree star_tree(std::size_t leaves, double weight) {
  std::vector<NodeSpec> specs{{"r", std::nullopt, 0.0, std::nullopt}};
  for (std::size_t i = 0; i < leaves; ++i) specs.push_back({std::to_string(i + 1), "r", weight, std::nullopt});
  return WeightedTree::build(specs);
}

WeightedTree balanced_tree(std::size_t branching, int depth, double top_weight, double ratio) {
  if (branching == 0 || depth < 1) throw DomainError("balanced tree needs branching >= 1 and depth >= 1");
  std::vector<NodeSpec> specs{{"r", std::nullopt, 0.0, std::nullopt}};
  std::vector<std::string> level{"r"};
  std::size_t leaf = 0;
  std::size_t inner = 0;
  double w = top_weight;
  for (int d = 1; d <= depth; ++d) {
    std::vector<std::string> next;
    for (const std::string& p : level) {
      for (std::size_t k = 0; k < branching; ++k) {
        const std::string id = d == depth ? std::to_string(++leaf) : "v" + std::to_string(inner++);
        specs.push_back({id, p, w, std::nullopt});
        next.push_back(id);
      }
    }
    level = std::move(next);
    w /= ratio;
  }
  return WeightedTree::build(specs);
}

WeightedTree random_hst(Rng& rng, const RandomHstOptions& opt) {
  if (opt.min_leaves < 1 || opt.max_leaves < opt.min_leaves || opt.max_depth < 1 || opt.max_children < 2) {
    throw DomainError("invalid random tree options");
  }
  const std::size_t total = opt.min_leaves + uniform_index(rng, opt.max_leaves - opt.min_leaves + 1);

  struct Pending {
    std::string id;
    std::size_t leaves;
    int depth;
    double weight;
  };
  std::vector<NodeSpec> specs{{"r", std::nullopt, 0.0, std::nullopt}};
  std::vector<Pending> stack{{"r", total, 0, opt.top_weight}};
  std::size_t leaf = 0;
  std::size_t inner = 0;
  while (!stack.empty()) {
    const Pending node = stack.back();
    stack.pop_back();
    auto child_weight = [&] {
      return node.depth == 0 ? opt.top_weight : node.weight / uniform(rng, opt.min_ratio, opt.max_ratio);
    };
    std::vector<std::size_t> parts;
    if (node.depth + 1 == opt.max_depth) {
      parts.assign(node.leaves, 1);
    } else if (node.leaves == 1) {
      parts.assign(1, 1);
    } else if (node.leaves > 1 && node.depth > 0 && uniform01(rng) < opt.unary_prob) {
      parts.assign(1, node.leaves);
    } else {
      const std::size_t cap = std::min(node.leaves, opt.max_children);
      const std::size_t c = 2 + uniform_index(rng, cap - 1);
      // c - 1 distinct cut points in 1..leaves-1.
      std::vector<std::size_t> cuts(node.leaves - 1);
      std::iota(cuts.begin(), cuts.end(), 1);
      shuffle(cuts, rng);
      cuts.resize(c - 1);
      std::sort(cuts.begin(), cuts.end());
      std::size_t prev = 0;
      for (std::size_t cut : cuts) {
        parts.push_back(cut - prev);
        prev = cut;
      }
      parts.push_back(node.leaves - prev);
    }
    std::vector<Pending> kids;
    for (std::size_t m : parts) {
      const double w = child_weight();
      if (m == 1 && (node.depth + 1 == opt.max_depth || uniform01(rng) < 0.7)) {
        specs.push_back({std::to_string(++leaf), node.id, w, std::nullopt});
      } else {
        const std::string id = "v" + std::to_string(inner++);
        specs.push_back({id, node.id, w, std::nullopt});
        kids.push_back({id, m, node.depth + 1, w});
      }
    }
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return WeightedTree::build(specs);
}

FiniteMetric uniform_metric(std::size_t points) {
  FiniteMetric m;
  for (std::size_t i = 0; i < points; ++i) m.labels.push_back(std::to_string(i + 1));
  m.dist.assign(points * points, 1.0);
  for (std::size_t i = 0; i < points; ++i) m.dist[i * points + i] = 0.0;
  return m;
}

FiniteMetric euclidean_metric(std::size_t points, std::size_t dim, Rng& rng) {
  std::vector<double> xs(points * dim);
  for (double& v : xs) v = uniform01(rng);
  FiniteMetric m;
  for (std::size_t i = 0; i < points; ++i) m.labels.push_back(std::to_string(i + 1));
  m.dist.assign(points * points, 0.0);
  for (std::size_t a = 0; a < points; ++a) {
    for (std::size_t b = a + 1; b < points; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double d = xs[a * dim + k] - xs[b * dim + k];
        s += d * d;
      }
      m.dist[a * points + b] = m.dist[b * points + a] = std::sqrt(s);
    }
  }
  return m;
}

std::vector<CostVector> generate_costs(const CostSpec& spec, const WeightedTree& tree, std::size_t T,
                                       std::uint64_t seed) {
  const std::size_t n = tree.leaf_count();
  Rng rng(seed);
  std::vector<CostVector> out;
  out.reserve(T);
  if (spec.kind == "constant") {
    if (!(spec.value >= 0.0)) throw DomainError("constant cost must be nonnegative");
    out.assign(T, CostVector(n, spec.value));
  } else if (spec.kind == "spike") {
    const double height = spec.spike ? *spec.spike : 1e6 * tree.max_weight();
    std::optional<std::size_t> target;
    if (spec.leaf) {
      target = tree.find_leaf(*spec.leaf);
      if (!target) throw DomainError("spike leaf '" + *spec.leaf + "' is not a leaf");
    }
    for (std::size_t t = 0; t < T; ++t) {
      CostVector c(n, 0.0);
      c[target ? *target : uniform_index(rng, n)] = height;
      out.push_back(std::move(c));
    }
  } else if (spec.kind == "random") {
    if (!(spec.zero_prob >= 0.0 && spec.zero_prob <= 1.0)) throw DomainError("zero probability must lie in [0, 1]");
    for (std::size_t t = 0; t < T; ++t) {
      CostVector c(n);
      for (double& v : c) {
        const bool zero = uniform01(rng) < spec.zero_prob;
        const double draw = spec.value * uniform01(rng);
        v = zero ? 0.0 : draw;
      }
      out.push_back(std::move(c));
    }
  } else if (spec.kind == "chase") {
    throw DomainError("chase costs depend on the online state; use ChaseSource");
  } else {
    throw DomainError("unknown cost kind '" + spec.kind + "'");
  }
  return out;
}

CostVector ChaseSource::next(const WeightedTree& tree, const OnlineState& state) {
  const auto leaves = tree.leaves();
  double best = -1.0;
  for (NodeId l : leaves) best = std::max(best, state.x[l]);
  auto is_max = [&](std::size_t i) { return state.x[leaves[i]] >= best - 1e-12; };
  std::size_t target = 0;
  if (last_ && is_max(*last_)) {
    target = *last_;
  } else {
    while (!is_max(target)) ++target;
  }
  last_ = target;
  CostVector c(leaves.size(), 0.0);
  c[target] = scale_;
  return c;
}

namespace {

std::string stringify(const Json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError("expected a string");
}

double get_number(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ParseError(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::size_t get_count(const Json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_unsigned()) throw ParseError(std::string("'") + key + "' must be a nonnegative integer");
  return j.at(key).get<std::size_t>();
}

std::string resolve(const std::string& base, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base) / p).string();
}

[[noreturn]] void rethrow_in(const std::string& stage) {
  try {
    throw;
  } catch (const StructureError& e) {
    throw StructureError(stage + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(stage + ": " + e.what());
  } catch (const SolverError& e) {
    throw SolverError(stage + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(stage + ": " + e.what());
  }
}

template <typename F>
auto in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (...) {
    rethrow_in(stage);
  }
}

FiniteMetric build_metric(const Json& spec, std::uint64_t seed, const std::string& base) {
  const std::string kind = stringify(spec.value("kind", Json("uniform")));
  if (kind == "uniform") return uniform_metric(get_count(spec, "points", 8));
  if (kind == "euclidean") {
    Rng rng(seed);
    return euclidean_metric(get_count(spec, "points", 8), get_count(spec, "dim", 2), rng);
  }
  if (kind == "file") {
    if (!spec.contains("path")) throw ParseError("metric file needs a 'path'");
    return metric_from_json(read_json_file(resolve(base, stringify(spec.at("path")))));
  }
  throw ParseError("unknown metric kind '" + kind + "'");
}

}  // namespace

ExperimentConfig config_from_json(const Json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ParseError("experiment config must be an object");
  ExperimentConfig c;
  c.base_dir = base_dir;
  if (!j.contains("name")) throw ParseError("experiment config needs a 'name'");
  c.name = stringify(j.at("name"));
  if (c.name.empty() || c.name.find('/') != std::string::npos || c.name == "." || c.name == "..") {
    throw ParseError("experiment name must be a plain file name");
  }
  if (!j.contains("seed") || !j.at("seed").is_number_unsigned()) {
    throw ParseError("experiment '" + c.name + "' needs a nonnegative integer 'seed'");
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  if (!j.contains("tree") || !j.at("tree").is_object()) throw ParseError("experiment needs a 'tree' object");
  c.tree = j.at("tree");
  if (j.contains("reshape")) c.reshape = j.at("reshape").get<bool>();
  c.horizon = get_count(j, "horizon", 0);
  if (j.contains("kappa") && !j.at("kappa").is_null()) c.kappa = get_number(j, "kappa", 1.0);
  c.tau = get_number(j, "tau", 7.0);
  if (j.contains("start") && !j.at("start").is_null()) c.start = stringify(j.at("start"));
  c.stretch_samples = get_count(j, "stretch_samples", 20);
  if (j.contains("costs")) {
    const Json& cs = j.at("costs");
    if (!cs.is_object()) throw ParseError("'costs' must be an object");
    c.costs.kind = stringify(cs.value("kind", Json("constant")));
    c.costs.value = get_number(cs, "value", 1.0);
    if (cs.contains("leaf")) c.costs.leaf = stringify(cs.at("leaf"));
    if (cs.contains("spike")) c.costs.spike = get_number(cs, "spike", 0.0);
    c.costs.zero_prob = get_number(cs, "zero_prob", 0.0);
  }
  return c;
}

std::vector<ExperimentConfig> configs_from_json(const Json& j, const std::string& base_dir) {
  std::vector<ExperimentConfig> out;
  const Json* list = &j;
  if (j.is_object() && j.contains("experiments")) list = &j.at("experiments");
  if (list->is_array()) {
    for (const Json& e : *list) out.push_back(config_from_json(e, base_dir));
  } else {
    out.push_back(config_from_json(*list, base_dir));
  }
  return out;
}

std::string ratio_csv_header() {
  return "name,seed,leaves,horizon,kappa,tau,S_on,M_on,S_off,M_off,cost_star,S_on_over_cost_star,"
         "M_on_over_kappa_S_on,service_slack,movement_slack,max_stretch,certified\n";
}

std::string ratio_csv_line(const RatioRow& r) {
  std::ostringstream out;
  out << r.name << ',' << r.seed << ',' << r.leaves << ',' << r.horizon << ',' << format_double(r.kappa) << ','
      << format_double(r.tau) << ',' << format_double(r.S_on) << ',' << format_double(r.M_on) << ','
      << format_double(r.S_off) << ',' << format_double(r.M_off) << ',' << format_double(r.cost_star) << ','
      << format_double(r.service_ratio) << ',' << format_double(r.movement_ratio) << ','
      << format_double(r.service_slack) << ',' << format_double(r.movement_slack) << ','
      << (r.max_stretch ? format_double(*r.max_stretch) : std::string()) << ',' << (r.certified ? "true" : "false")
      << '\n';
  return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  std::optional<FiniteMetric> metric;
  std::optional<double> stretch;
  WeightedTree tree = in_stage("tree", [&] {
    const Json& spec = config.tree;
    const std::string kind = stringify(spec.value("kind", Json("")));
    if (kind == "star") return star_tree(get_count(spec, "leaves", 2), get_number(spec, "weight", 1.0));
    if (kind == "balanced") {
      return balanced_tree(get_count(spec, "branching", 2), static_cast<int>(get_count(spec, "depth", 2)),
                           get_number(spec, "top_weight", 1.0), get_number(spec, "ratio", config.tau));
    }
    if (kind == "random_hst") {
      RandomHstOptions opt;
      opt.min_leaves = get_count(spec, "min_leaves", opt.min_leaves);
      opt.max_leaves = get_count(spec, "max_leaves", opt.max_leaves);
      opt.max_depth = static_cast<int>(get_count(spec, "max_depth", 3));
      opt.max_children = get_count(spec, "max_children", opt.max_children);
      opt.top_weight = get_number(spec, "top_weight", opt.top_weight);
      opt.min_ratio = get_number(spec, "min_ratio", config.tau);
      opt.max_ratio = get_number(spec, "max_ratio", 2.0 * opt.min_ratio);
      Rng rng(derive_seed(config.seed, 1));
      return random_hst(rng, opt);
    }
    if (kind == "file") {
      if (!spec.contains("path")) throw ParseError("tree file needs a 'path'");
      return tree_from_json(read_json_file(resolve(config.base_dir, stringify(spec.at("path")))));
    }
    if (kind == "metric") {
      metric = build_metric(spec.value("metric", Json::object()), derive_seed(config.seed, 2), config.base_dir);
      stretch = estimate_stretch(*metric, std::max<std::size_t>(config.stretch_samples, 1), derive_seed(config.seed, 3))
                    .max_mean;
      return frt_embed(*metric, derive_seed(config.seed, 4));
    }
    throw ParseError("unknown tree kind '" + kind + "'");
  });

  if (config.reshape || metric) {
    tree = in_stage("reshape", [&] { return reshape(tree).first; });
  }
  if (tree.leaf_count() < 2) throw DomainError("tree: experiments need at least two leaves");

  const double kappa = config.kappa ? *config.kappa : (metric ? default_kappa(metric->size()) : 1.0);

  std::size_t start_leaf = 0;
  bool uniform_start = false;
  if (config.start) {
    if (*config.start == "uniform") {
      uniform_start = true;
    } else {
      const auto leaf = tree.find_leaf(*config.start);
      if (!leaf) throw DomainError("online: start '" + *config.start + "' is not a leaf");
      start_leaf = *leaf;
    }
  }
  const ConditionalState q0 = uniform_start ? uniform_state(tree) : point_mass_state(tree, start_leaf);

  Trajectory online = in_stage("online", [&] {
    if (config.costs.kind == "chase") {
      ChaseSource source(config.costs.value);
      return run_adaptive(tree, q0, source, config.horizon, kappa, config.tau);
    }
    const auto costs = generate_costs(config.costs, tree, config.horizon, derive_seed(config.seed, 5));
    return run(tree, q0, costs, kappa, config.tau);
  });

  const OfflineTrajectory offline = in_stage("offline", [&] { return optimal(tree, online.costs, start_leaf); });
  AuditReport audit =
      in_stage("audit", [&] { return audit_trajectory(tree, online, to_marginals(tree, offline.leaves)); });

  double cost_star = offline.total();
  if (metric) {
    cost_star = in_stage("offline", [&] {
      const std::vector<std::size_t> map = leaf_map(*metric, tree);
      std::vector<CostVector> point_costs;
      for (const CostVector& c : online.costs) {
        CostVector pc(metric->size());
        for (std::size_t i = 0; i < metric->size(); ++i) pc[i] = c[map[i]];
        point_costs.push_back(std::move(pc));
      }
      std::size_t start_point = 0;
      while (map[start_point] != start_leaf) ++start_point;
      return optimal_on_metric(metric->dist, metric->size(), point_costs, start_point).optimum;
    });
  }

  ExperimentResult r;
  RatioRow& row = r.row;
  row.name = config.name;
  row.seed = config.seed;
  row.leaves = tree.leaf_count();
  row.horizon = config.horizon;
  row.kappa = kappa;
  row.tau = config.tau;
  row.S_on = online.service();
  row.M_on = online.movement();
  row.S_off = offline.service;
  row.M_off = offline.movement;
  row.cost_star = cost_star;
  row.service_ratio = cost_star > 0.0 ? row.S_on / cost_star : 0.0;
  row.movement_ratio = row.S_on > 0.0 ? row.M_on / (kappa * row.S_on) : 0.0;
  row.service_slack = audit.fine.service.slack();
  row.movement_slack = audit.fine.movement.slack();
  row.max_stretch = stretch;
  row.certified = audit.certified();

  r.trajectory = trajectory_to_json(tree, online);
  r.trajectory["seed"] = config.seed;
  r.offline = offline_to_json(tree, offline);
  r.offline["seed"] = config.seed;
  r.audit_json = audit_to_json(audit);
  r.audit_json["seed"] = config.seed;
  if (stretch) r.audit_json["max_stretch"] = *stretch;
  r.audit = std::move(audit);
  return r;
}

void write_artifacts(const ExperimentResult& r, const std::string& out_dir) {
  const std::filesystem::path dir = std::filesystem::path(out_dir) / r.row.name;
  std::filesystem::create_directories(dir);
  write_json_file((dir / "trajectory.json").string(), r.trajectory);
  write_json_file((dir / "offline.json").string(), r.offline);
  write_json_file((dir / "audit.json").string(), r.audit_json);
}

}  // namespace mts
