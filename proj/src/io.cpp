#include "mts/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "mts/error.hpp"

namespace mts {
namespace {

double number(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(what + ": '" + s + "' is not a number");
    return v;
  }
  throw ParseError(what + " must be a number or a decimal string");
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string text(const Json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError(what + " must be a string");
}

std::vector<double> row(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& v : j) out.push_back(number(v, what));
  return out;
}

std::vector<CostVector> cost_rows(const Json& rows, const Json* labels, const WeightedTree& tree) {
  if (!rows.is_array()) throw ParseError("costs must be an array of arrays");
  std::vector<std::size_t> column;
  if (labels) {
    if (!labels->is_array() || labels->size() != tree.leaf_count()) {
      throw ParseError("cost labels must list every leaf once");
    }
    std::vector<char> used(tree.leaf_count(), 0);
    for (const Json& l : *labels) {
      const std::string name = text(l, "cost label");
      const auto leaf = tree.find_leaf(name);
      if (!leaf) throw ParseError("cost label '" + name + "' is not a leaf");
      if (used[*leaf]++) throw ParseError("cost label '" + name + "' repeated");
      column.push_back(*leaf);
    }
  }
  std::vector<CostVector> out;
  out.reserve(rows.size());
  for (const Json& r : rows) {
    const std::vector<double> vals = row(r, "cost");
    if (vals.size() != tree.leaf_count()) {
      throw ParseError("cost row has " + std::to_string(vals.size()) + " entries, tree has " +
                       std::to_string(tree.leaf_count()) + " leaves");
    }
    if (!labels) {
      out.push_back(vals);
      continue;
    }
    CostVector c(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) c[column[i]] = vals[i];
    out.push_back(std::move(c));
  }
  return out;
}

Json leaf_labels(const WeightedTree& tree) {
  Json out = Json::array();
  for (NodeId l : tree.leaves()) out.push_back(tree.label(l));
  return out;
}

}  // namespace

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

WeightedTree tree_from_json(const Json& j) {
  const Json& nodes = field(j, "nodes");
  if (!nodes.is_array()) throw ParseError("'nodes' must be an array");
  std::vector<NodeSpec> specs;
  specs.reserve(nodes.size());
  for (const Json& n : nodes) {
    NodeSpec s;
    s.id = text(field(n, "id"), "node id");
    if (n.contains("parent") && !n.at("parent").is_null()) s.parent = text(n.at("parent"), "parent");
    if (s.parent) s.weight = number(field(n, "weight"), "weight of '" + s.id + "'");
    if (n.contains("label") && !n.at("label").is_null()) s.label = text(n.at("label"), "label");
    specs.push_back(std::move(s));
  }
  WeightedTree tree = WeightedTree::build(specs);
  if (j.contains("root")) {
    const std::string root = text(j.at("root"), "root");
    if (root != tree.id(tree.root())) {
      throw StructureError("declared root '" + root + "' is not the parentless node '" + tree.id(tree.root()) + "'");
    }
  }
  return tree;
}

Json tree_to_json(const WeightedTree& tree) {
  Json nodes = Json::array();
  for (const NodeSpec& s : tree.to_specs()) {
    Json n;
    n["id"] = s.id;
    n["parent"] = s.parent ? Json(*s.parent) : Json(nullptr);
    if (s.parent) n["weight"] = s.weight;
    if (s.label) n["label"] = *s.label;
    nodes.push_back(std::move(n));
  }
  Json out;
  out["root"] = tree.id(tree.root());
  out["nodes"] = std::move(nodes);
  return out;
}

FiniteMetric metric_from_json(const Json& j) {
  FiniteMetric m;
  for (const Json& l : field(j, "labels")) m.labels.push_back(text(l, "point label"));
  const Json& d = field(j, "dist");
  if (!d.is_array() || d.size() != m.size()) throw ParseError("'dist' must have one row per label");
  for (const Json& r : d) {
    const std::vector<double> vals = row(r, "distance");
    if (vals.size() != m.size()) throw ParseError("distance row has the wrong length");
    m.dist.insert(m.dist.end(), vals.begin(), vals.end());
  }
  validate_metric(m);
  return m;
}

Json metric_to_json(const FiniteMetric& m) {
  Json out;
  out["labels"] = m.labels;
  Json rows = Json::array();
  for (std::size_t a = 0; a < m.size(); ++a) {
    rows.push_back(std::vector<double>(m.dist.begin() + static_cast<std::ptrdiff_t>(a * m.size()),
                                       m.dist.begin() + static_cast<std::ptrdiff_t>((a + 1) * m.size())));
  }
  out["dist"] = std::move(rows);
  return out;
}

std::vector<CostVector> costs_from_json(const Json& j, const WeightedTree& tree) {
  if (j.is_array()) return cost_rows(j, nullptr, tree);
  const Json* labels = j.contains("labels") ? &j.at("labels") : nullptr;
  return cost_rows(field(j, "costs"), labels, tree);
}

Json costs_to_json(const WeightedTree& tree, const std::vector<CostVector>& costs) {
  Json out;
  out["labels"] = leaf_labels(tree);
  out["costs"] = costs;
  return out;
}

Json trajectory_to_json(const WeightedTree& tree, const Trajectory& traj) {
  Json out;
  out["tree"] = tree_to_json(tree);
  out["kappa"] = traj.kappa;
  out["tau"] = traj.tau;
  out["labels"] = leaf_labels(tree);
  Json nodes = Json::array();
  for (std::size_t u = 0; u < tree.node_count(); ++u) nodes.push_back(tree.id(static_cast<NodeId>(u)));
  out["nodes"] = std::move(nodes);
  out["costs"] = traj.costs;
  Json q = Json::array();
  for (const OnlineState& s : traj.states) q.push_back(s.q.prob);
  out["q"] = std::move(q);
  Json steps = Json::array();
  for (const StepAudit& a : traj.audits) {
    Json s;
    s["service"] = a.service;
    s["movement"] = a.movement;
    s["sub_steps"] = a.sub_steps;
    steps.push_back(std::move(s));
  }
  out["steps"] = std::move(steps);
  out["service"] = traj.service();
  out["movement"] = traj.movement();
  return out;
}

std::pair<WeightedTree, Trajectory> trajectory_from_json(const Json& j) {
  WeightedTree tree = tree_from_json(field(j, "tree"));
  const Json& nodes = field(j, "nodes");
  if (!nodes.is_array() || nodes.size() != tree.node_count()) throw ParseError("'nodes' does not match the tree");
  for (std::size_t u = 0; u < tree.node_count(); ++u) {
    if (text(nodes[u], "node id") != tree.id(static_cast<NodeId>(u))) {
      throw ParseError("node order in the trajectory does not match the tree");
    }
  }
  Trajectory traj;
  traj.kappa = number(field(j, "kappa"), "kappa");
  traj.tau = number(field(j, "tau"), "tau");
  Json labelled;
  labelled["labels"] = field(j, "labels");
  labelled["costs"] = field(j, "costs");
  traj.costs = costs_from_json(labelled, tree);
  const Json& qs = field(j, "q");
  if (!qs.is_array() || qs.size() != traj.costs.size() + 1) throw ParseError("expected one more state than costs");
  for (const Json& q : qs) {
    ConditionalState c{row(q, "q")};
    if (c.prob.size() != tree.node_count()) throw ParseError("state has the wrong length");
    OnlineState s;
    s.x = delta_map(tree, c);
    s.q = std::move(c);
    s.step = traj.states.size();
    traj.states.push_back(std::move(s));
  }
  const Json& steps = field(j, "steps");
  if (!steps.is_array() || steps.size() != traj.costs.size()) throw ParseError("expected one step record per cost");
  double s_total = 0.0;
  double m_total = 0.0;
  for (const Json& s : steps) {
    StepAudit a;
    a.service = number(field(s, "service"), "service");
    a.movement = number(field(s, "movement"), "movement");
    a.sub_steps = field(s, "sub_steps").get<std::size_t>();
    s_total += a.service;
    m_total += a.movement;
    traj.cumulative_service.push_back(s_total);
    traj.cumulative_movement.push_back(m_total);
    traj.audits.push_back(std::move(a));
  }
  return {std::move(tree), std::move(traj)};
}

Json offline_to_json(const WeightedTree& tree, const OfflineTrajectory& off) {
  Json out;
  Json path = Json::array();
  for (std::size_t l : off.leaves) path.push_back(tree.label(tree.leaves()[l]));
  out["start"] = path.empty() ? Json(nullptr) : path.front();
  out["trajectory"] = std::move(path);
  out["optimum"] = off.optimum;
  out["service"] = off.service;
  out["movement"] = off.movement;
  out["total"] = off.total();
  return out;
}

std::vector<std::size_t> offline_leaves_from_json(const Json& j, const WeightedTree& tree) {
  std::vector<std::size_t> out;
  for (const Json& l : field(j, "trajectory")) {
    const std::string name = text(l, "offline state");
    const auto leaf = tree.find_leaf(name);
    if (!leaf) throw ParseError("offline state '" + name + "' is not a leaf");
    out.push_back(*leaf);
  }
  return out;
}

Json certificate_to_json(const Certificate& c) {
  Json out;
  out["check"] = c.check;
  out["certified"] = c.certified;
  out["lhs"] = c.lhs;
  out["rhs"] = c.rhs;
  out["tolerance"] = c.tolerance;
  Json terms = Json::object();
  for (const Term& t : c.terms) terms[t.name] = t.value;
  out["terms"] = std::move(terms);
  return out;
}

Json audit_to_json(const AuditReport& r) {
  Json out;
  out["certified"] = r.certified();
  out["violation_count"] = r.violation_count();
  Json checks = Json::array();
  for (const CheckSummary& s : r.summaries) {
    Json c;
    c["check"] = s.check;
    c["count"] = s.count;
    c["violations"] = s.violations;
    c["min_slack"] = s.min_slack;
    checks.push_back(std::move(c));
  }
  out["checks"] = std::move(checks);
  Json v = Json::array();
  for (const Certificate& c : r.violations) v.push_back(certificate_to_json(c));
  out["violations"] = std::move(v);
  Json fine;
  fine["service"] = certificate_to_json(r.fine.service);
  fine["movement"] = certificate_to_json(r.fine.movement);
  fine["service_ratio"] = r.fine.service_ratio;
  fine["movement_ratio"] = r.fine.movement_ratio;
  fine["movement_additive"] = r.fine.movement_additive;
  out["fine"] = std::move(fine);
  out["max_state_mismatch"] = r.max_state_mismatch;
  return out;
}

Json reshape_report_to_json(const ReshapeReport& r) {
  Json out;
  out["original_depth"] = r.original_depth;
  out["new_depth"] = r.new_depth;
  out["original_nodes"] = r.original_nodes;
  out["new_nodes"] = r.new_nodes;
  out["min_ratio"] = r.min_ratio;
  out["max_ratio"] = r.max_ratio;
  out["pairs"] = r.pairs;
  out["exhaustive"] = r.exhaustive;
  out["scale"] = r.scale;
  out["degenerate"] = r.degenerate;
  return out;
}

Json violations_to_json(const std::vector<HstViolation>& v) {
  Json out = Json::array();
  for (const HstViolation& h : v) {
    Json e;
    e["parent"] = h.parent_id;
    e["child"] = h.child_id;
    e["ratio"] = h.ratio;
    out.push_back(std::move(e));
  }
  return out;
}

CostSchedule schedule_from_json(const Json& j, const WeightedTree& tree) {
  CostSchedule s;
  if (j.contains("breaks")) s.breaks = row(j.at("breaks"), "breakpoint");
  for (std::size_t i = 0; i < s.breaks.size(); ++i) {
    if (!(s.breaks[i] > 0.0 && s.breaks[i] < 1.0) || (i > 0 && s.breaks[i] <= s.breaks[i - 1])) {
      throw ParseError("breakpoints must be increasing and inside (0, 1)");
    }
  }
  const Json* labels = j.contains("labels") ? &j.at("labels") : nullptr;
  s.values = cost_rows(field(j, "costs"), labels, tree);
  if (s.values.size() != s.breaks.size() + 1) throw ParseError("schedule needs one more cost row than breakpoints");
  for (const CostVector& c : s.values) {
    for (double v : c) {
      if (!std::isfinite(v) || v < 0.0) throw ParseError("schedule costs must be finite and nonnegative");
    }
  }
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string convergence_csv(const ConvergenceStudy& s) {
  std::string out = "M,distance,max_increment,conservation\n";
  for (const ConvergenceRow& r : s.rows) {
    out += std::to_string(r.M) + ',' + format_double(r.distance) + ',' + format_double(r.max_increment) + ',' +
           format_double(r.conservation) + '\n';
  }
  return out;
}

}  // namespace mts
