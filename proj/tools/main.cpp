// mts command-line tool. Exit codes: 0 success, 1 a checked inequality or
// HST property failed, 2 any error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mts/mts.h"

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kError = 2;

struct Failure {
  int code;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open '" << path << "'\n";
    throw Failure{kError};
  }
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    throw Failure{kError};
  }
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

// Owns a string returned by the library.
class Text {
 public:
  ~Text() { mts_string_free(p_); }
  char** out() { return &p_; }
  std::string str() const { return p_ ? p_ : ""; }

 private:
  char* p_ = nullptr;
};

void check(mts_status s, const char* what) {
  if (s == MTS_OK) return;
  std::cerr << what << ": " << mts_status_name(s) << ": " << mts_last_error() << '\n';
  throw Failure{s == MTS_VIOLATION ? kViolation : kError};
}

struct Tree {
  mts_tree* t = nullptr;
  explicit Tree(const std::string& path) { check(mts_tree_load(path.c_str(), &t), "tree"); }
  Tree() = default;
  ~Tree() { mts_tree_free(t); }
  Tree(const Tree&) = delete;
  Tree& operator=(const Tree&) = delete;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropic mirror descent for metrical task systems on HSTs"};
  app.require_subcommand(1);

  std::string tree_path, out_path, report_path, costs_path, start, traj_path, offline_path, metric_path,
      schedule_path, config_path, out_dir = "out";
  double tau = 7.0;
  double kappa = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> mlist{8, 16, 32, 64, 128, 256, 512};
  unsigned jobs = 1;
  std::size_t samples = 0;

  auto* validate = app.add_subcommand("validate", "Check that a tree is a tau-HST");
  validate->add_option("--tree", tree_path, "Tree JSON")->required();
  validate->add_option("--tau", tau, "Separation factor")->capture_default_str();
  validate->add_option("--out", out_path, "Report path (stdout if omitted)");

  auto* reshape = app.add_subcommand("reshape", "Convert an HST into a 7-HST with uniform leaf depth");
  reshape->add_option("--in", tree_path, "Input tree JSON")->required();
  reshape->add_option("--out", out_path, "Output tree JSON")->required();
  reshape->add_option("--report", report_path, "Distortion report JSON");

  auto* run = app.add_subcommand("run", "Run the online algorithm");
  run->add_option("--tree", tree_path, "Tree JSON")->required();
  run->add_option("--costs", costs_path, "Cost sequence JSON")->required();
  run->add_option("--kappa", kappa, "Scale parameter (>= 1)")->capture_default_str();
  run->add_option("--tau", tau, "Separation factor (> 3)")->capture_default_str();
  run->add_option("--start", start, "Start leaf label or 'uniform' (default: first leaf)");
  run->add_option("--out", out_path, "Trajectory JSON")->required();

  auto* offline = app.add_subcommand("offline", "Offline optimum by dynamic programming");
  offline->add_option("--tree", tree_path, "Tree JSON")->required();
  offline->add_option("--costs", costs_path, "Cost sequence JSON")->required();
  offline->add_option("--start", start, "Start leaf label (default: first leaf)");
  offline->add_option("--out", out_path, "Offline trajectory JSON")->required();

  auto* checkc = app.add_subcommand("check", "Audit a trajectory against an offline comparator");
  checkc->add_option("--traj", traj_path, "Trajectory JSON from 'run'")->required();
  checkc->add_option("--offline", offline_path, "Offline JSON from 'offline'")->required();
  checkc->add_option("--report", report_path, "Audit JSON (stdout if omitted)");

  auto* embed = app.add_subcommand("embed", "Random dominating HST for a finite metric");
  embed->add_option("--metric", metric_path, "Metric JSON")->required();
  embed->add_option("--seed", seed, "Random seed")->required();
  embed->add_option("--out", out_path, "Tree JSON")->required();
  embed->add_option("--stretch-samples", samples, "Also estimate the max mean stretch");

  auto* converge = app.add_subcommand("converge", "Refinement study of the discretized dynamics");
  converge->add_option("--tree", tree_path, "Tree JSON")->required();
  converge->add_option("--schedule", schedule_path, "Cost schedule JSON")->required();
  converge->add_option("--mlist", mlist, "Resolutions")->delimiter(',')->capture_default_str();
  converge->add_option("--kappa", kappa, "Scale parameter (>= 1)")->capture_default_str();
  converge->add_option("--out", out_path, "CSV path (stdout if omitted)");

  auto* experiment = app.add_subcommand("experiment", "Run experiment configs end to end");
  experiment->add_option("--config", config_path, "Experiment config JSON")->required();
  experiment->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  experiment->add_option("--jobs", jobs, "Concurrent experiments")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      Tree t(tree_path);
      int valid = 0;
      Text report;
      check(mts_tree_validate(t.t, tau, &valid, report.out()), "validate");
      emit(out_path, report.str());
      return valid ? kOk : kViolation;
    }
    if (*reshape) {
      Tree t(tree_path);
      Tree out;
      Text report;
      check(mts_reshape(t.t, &out.t, report.out()), "reshape");
      Text json;
      check(mts_tree_to_json(out.t, json.out()), "reshape");
      emit(out_path, json.str());
      if (!report_path.empty()) emit(report_path, report.str());
      return kOk;
    }
    if (*run) {
      Tree t(tree_path);
      const std::string costs = slurp(costs_path);
      Text traj;
      check(mts_run(t.t, costs.c_str(), kappa, tau, start.empty() ? nullptr : start.c_str(), traj.out()), "run");
      emit(out_path, traj.str());
      return kOk;
    }
    if (*offline) {
      Tree t(tree_path);
      const std::string costs = slurp(costs_path);
      Text off;
      check(mts_offline(t.t, costs.c_str(), start.empty() ? nullptr : start.c_str(), off.out()), "offline");
      emit(out_path, off.str());
      return kOk;
    }
    if (*checkc) {
      const std::string traj = slurp(traj_path);
      const std::string off = slurp(offline_path);
      Text audit;
      const mts_status s = mts_check(traj.c_str(), off.c_str(), audit.out());
      if (s == MTS_OK || s == MTS_VIOLATION) emit(report_path, audit.str());
      check(s, "check");
      return kOk;
    }
    if (*embed) {
      mts_metric* m = nullptr;
      check(mts_metric_load(metric_path.c_str(), &m), "embed");
      Tree out;
      const mts_status s = mts_embed(m, seed, &out.t);
      double stretch = 0.0;
      const mts_status s2 = s == MTS_OK && samples > 0 ? mts_stretch(m, samples, seed, &stretch) : MTS_OK;
      mts_metric_free(m);
      check(s, "embed");
      check(s2, "embed");
      Text json;
      check(mts_tree_to_json(out.t, json.out()), "embed");
      emit(out_path, json.str());
      if (samples > 0) std::cout << "max mean stretch over " << samples << " samples: " << stretch << '\n';
      return kOk;
    }
    if (*converge) {
      Tree t(tree_path);
      const std::string schedule = slurp(schedule_path);
      Text csv;
      check(mts_converge(t.t, schedule.c_str(), mlist.data(), mlist.size(), kappa, csv.out()), "converge");
      emit(out_path, csv.str());
      return kOk;
    }
    if (*experiment) {
      const std::string config = slurp(config_path);
      const std::string base = std::filesystem::path(config_path).parent_path().string();
      Text summary;
      const mts_status s =
          mts_experiment(config.c_str(), base.empty() ? "." : base.c_str(), out_dir.c_str(), jobs, summary.out());
      if (!summary.str().empty()) std::cout << summary.str() << '\n';
      check(s, "experiment");
      return kOk;
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return kError;
}
