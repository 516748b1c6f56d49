#include "mts/mts.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mts/continuous.hpp"
#include "mts/embedding.hpp"
#include "mts/error.hpp"
#include "mts/harness.hpp"
#include "mts/io.hpp"
#include "mts/offline.hpp"
#include "mts/online.hpp"
#include "mts/potentials.hpp"
#include "mts/projection.hpp"
#include "mts/reshape.hpp"

struct mts_tree {
  mts::WeightedTree tree;
};

struct mts_metric {
  mts::FiniteMetric metric;
};

namespace {

thread_local std::string last_error;

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

mts_status fail(mts_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

mts_status status_of(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const ArgumentError& x) {
    return fail(MTS_ERR_ARGUMENT, x.what());
  } catch (const mts::StructureError& x) {
    return fail(MTS_ERR_STRUCTURE, x.what());
  } catch (const mts::DomainError& x) {
    return fail(MTS_ERR_DOMAIN, x.what());
  } catch (const mts::SolverError& x) {
    return fail(MTS_ERR_SOLVER, x.what());
  } catch (const mts::ParseError& x) {
    return fail(MTS_ERR_PARSE, x.what());
  } catch (const nlohmann::json::exception& x) {
    return fail(MTS_ERR_PARSE, x.what());
  } catch (const std::filesystem::filesystem_error& x) {
    return fail(MTS_ERR_IO, x.what());
  } catch (const mts::Error& x) {
    return fail(MTS_ERR_IO, x.what());
  } catch (const std::exception& x) {
    return fail(MTS_ERR_INTERNAL, x.what());
  } catch (...) {
    return fail(MTS_ERR_INTERNAL, "unknown error");
  }
}

template <typename F>
mts_status guard(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (...) {
    return status_of(std::current_exception());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mts::Json parse(const char* text) {
  if (!text) throw ArgumentError("null JSON text");
  try {
    return mts::Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw mts::ParseError(e.what());
  }
}

std::size_t start_leaf(const mts::WeightedTree& tree, const char* start) {
  if (!start) return 0;
  const auto leaf = tree.find_leaf(start);
  if (!leaf) throw mts::DomainError(std::string("start '") + start + "' is not a leaf");
  return *leaf;
}

}  // namespace

extern "C" {

const char* mts_last_error(void) { return last_error.c_str(); }

void mts_string_free(char* s) { std::free(s); }

const char* mts_status_name(mts_status s) {
  switch (s) {
    case MTS_OK: return "ok";
    case MTS_ERR_STRUCTURE: return "structure error";
    case MTS_ERR_DOMAIN: return "domain error";
    case MTS_ERR_SOLVER: return "solver error";
    case MTS_ERR_PARSE: return "parse error";
    case MTS_ERR_IO: return "i/o error";
    case MTS_ERR_ARGUMENT: return "invalid argument";
    case MTS_ERR_INTERNAL: return "internal error";
    case MTS_VIOLATION: return "violation";
  }
  return "unknown status";
}

mts_status mts_tree_from_json(const char* json, mts_tree** out) {
  if (!out) return fail(MTS_ERR_ARGUMENT, "null output handle");
  return guard([&] {
    *out = new mts_tree{mts::tree_from_json(parse(json))};
    return MTS_OK;
  });
}

mts_status mts_tree_load(const char* path, mts_tree** out) {
  if (!out || !path) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = new mts_tree{mts::tree_from_json(mts::read_json_file(path))};
    return MTS_OK;
  });
}

void mts_tree_free(mts_tree* t) { delete t; }

mts_status mts_tree_to_json(const mts_tree* t, char** out) {
  if (!t || !out) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = dup(mts::tree_to_json(t->tree).dump(2));
    return MTS_OK;
  });
}

size_t mts_tree_leaf_count(const mts_tree* t) { return t ? t->tree.leaf_count() : 0; }

int mts_tree_depth(const mts_tree* t) { return t ? t->tree.depth() : 0; }

mts_status mts_tree_validate(const mts_tree* t, double tau, int* valid, char** report) {
  if (!t || !valid) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    if (!(tau >= 1.0)) throw mts::DomainError("tau must be >= 1");
    const auto v = mts::validate_tree(t->tree, tau);
    *valid = v.empty() ? 1 : 0;
    if (report) {
      mts::Json j;
      j["tau"] = tau;
      j["valid"] = v.empty();
      j["leaves"] = t->tree.leaf_count();
      j["depth"] = t->tree.depth();
      j["violations"] = mts::violations_to_json(v);
      *report = dup(j.dump(2));
    }
    return MTS_OK;
  });
}

mts_status mts_tree_epsilon(const mts_tree* t, double kappa, double tau, double* out) {
  if (!t || !out) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = mts::epsilon_threshold(t->tree, kappa, tau);
    return MTS_OK;
  });
}

mts_status mts_reshape(const mts_tree* t, mts_tree** out, char** report) {
  if (!t || !out) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    auto [tree, rep] = mts::reshape(t->tree);
    if (report) *report = dup(mts::reshape_report_to_json(rep).dump(2));
    *out = new mts_tree{std::move(tree)};
    return MTS_OK;
  });
}

mts_status mts_run(const mts_tree* t, const char* costs_json, double kappa, double tau, const char* start,
                   char** trajectory) {
  if (!t || !trajectory) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    const auto costs = mts::costs_from_json(parse(costs_json), t->tree);
    const mts::ConditionalState q0 = start && std::string(start) == "uniform"
                                         ? mts::uniform_state(t->tree)
                                         : mts::point_mass_state(t->tree, start_leaf(t->tree, start));
    const mts::Trajectory traj = mts::run(t->tree, q0, costs, kappa, tau);
    *trajectory = dup(mts::trajectory_to_json(t->tree, traj).dump(2));
    return MTS_OK;
  });
}

mts_status mts_offline(const mts_tree* t, const char* costs_json, const char* start, char** offline) {
  if (!t || !offline) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    const auto costs = mts::costs_from_json(parse(costs_json), t->tree);
    const auto off = mts::optimal(t->tree, costs, start_leaf(t->tree, start));
    *offline = dup(mts::offline_to_json(t->tree, off).dump(2));
    return MTS_OK;
  });
}

mts_status mts_check(const char* trajectory, const char* offline, char** audit) {
  if (!audit) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    auto [tree, traj] = mts::trajectory_from_json(parse(trajectory));
    const auto leaves = mts::offline_leaves_from_json(parse(offline), tree);
    const auto report = mts::audit_trajectory(tree, traj, mts::to_marginals(tree, leaves));
    *audit = dup(mts::audit_to_json(report).dump(2));
    if (!report.certified()) {
      last_error = std::to_string(report.violation_count()) + " per-step violations; cumulative bounds " +
                   (report.fine.certified() ? "hold" : "fail");
      return MTS_VIOLATION;
    }
    return MTS_OK;
  });
}

mts_status mts_metric_from_json(const char* json, mts_metric** out) {
  if (!out) return fail(MTS_ERR_ARGUMENT, "null output handle");
  return guard([&] {
    *out = new mts_metric{mts::metric_from_json(parse(json))};
    return MTS_OK;
  });
}

mts_status mts_metric_load(const char* path, mts_metric** out) {
  if (!out || !path) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = new mts_metric{mts::metric_from_json(mts::read_json_file(path))};
    return MTS_OK;
  });
}

void mts_metric_free(mts_metric* m) { delete m; }

mts_status mts_embed(const mts_metric* m, uint64_t seed, mts_tree** out) {
  if (!m || !out) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *out = new mts_tree{mts::frt_embed(m->metric, seed)};
    return MTS_OK;
  });
}

mts_status mts_stretch(const mts_metric* m, size_t samples, uint64_t seed, double* max_mean) {
  if (!m || !max_mean) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    *max_mean = mts::estimate_stretch(m->metric, samples, seed).max_mean;
    return MTS_OK;
  });
}

mts_status mts_converge(const mts_tree* t, const char* schedule_json, const size_t* m_list, size_t count,
                        double kappa, char** csv) {
  if (!t || !csv || (!m_list && count > 0)) return fail(MTS_ERR_ARGUMENT, "null argument");
  return guard([&] {
    const auto schedule = mts::schedule_from_json(parse(schedule_json), t->tree);
    const std::vector<std::size_t> Ms(m_list, m_list + count);
    const auto study = mts::convergence_study(t->tree, schedule, Ms, kappa, mts::uniform_state(t->tree));
    *csv = dup(mts::convergence_csv(study));
    return MTS_OK;
  });
}

mts_status mts_experiment(const char* config_json, const char* base_dir, const char* out_dir, unsigned jobs,
                          char** summary) {
  if (!out_dir) return fail(MTS_ERR_ARGUMENT, "null output directory");
  return guard([&] {
    const auto configs = mts::configs_from_json(parse(config_json), base_dir ? base_dir : ".");
    const std::size_t n = configs.size();
    std::vector<std::optional<mts::RatioRow>> rows(n);
    std::vector<std::string> errors(n);
    std::vector<mts_status> codes(n, MTS_OK);
    std::filesystem::create_directories(out_dir);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          const mts::ExperimentResult r = mts::run_experiment(configs[i]);
          mts::write_artifacts(r, out_dir);
          rows[i] = r.row;
        } catch (...) {
          codes[i] = status_of(std::current_exception());
          errors[i] = last_error;
        }
      }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();

    const std::filesystem::path csv = std::filesystem::path(out_dir) / "ratios.csv";
    const bool fresh = !std::filesystem::exists(csv) || std::filesystem::file_size(csv) == 0;
    std::ofstream table(csv, std::ios::app);
    if (!table) throw mts::Error("cannot write '" + csv.string() + "'");
    if (fresh) table << mts::ratio_csv_header();

    mts_status status = MTS_OK;
    mts::Json out = mts::Json::array();
    for (std::size_t i = 0; i < n; ++i) {
      mts::Json e;
      e["name"] = configs[i].name;
      if (codes[i] != MTS_OK) {
        e["status"] = mts_status_name(codes[i]);
        e["error"] = errors[i];
        if (status == MTS_OK || status == MTS_VIOLATION) status = codes[i];
      } else {
        e["status"] = "ok";
        e["certified"] = rows[i]->certified;
        e["S_on_over_cost_star"] = rows[i]->service_ratio;
        e["M_on_over_kappa_S_on"] = rows[i]->movement_ratio;
        if (rows[i]->certified) {
          table << mts::ratio_csv_line(*rows[i]);
        } else if (status == MTS_OK) {
          status = MTS_VIOLATION;
        }
      }
      out.push_back(std::move(e));
    }
    if (summary) *summary = dup(out.dump(2));
    if (status == MTS_VIOLATION) {
      last_error = "an experiment failed its audit";
    } else if (status != MTS_OK) {
      for (std::size_t i = 0; i < n; ++i) {
        if (codes[i] != MTS_OK) {
          last_error = configs[i].name + ": " + errors[i];
          break;
        }
      }
    }
    return status;
  });
}

mts_status mts_project_node(size_t k, const double* q, const double* cost, const double* weight, const double* eta,
                            const double* delta, double kappa, double* p, double* alpha, double* beta) {
  if (k == 0 || !q || !cost || !weight || !eta || !delta || !p || !alpha || !beta) {
    return fail(MTS_ERR_ARGUMENT, "null argument or no children");
  }
  return guard([&] {
    mts::ProjectionInput in;
    in.kappa = kappa;
    for (size_t i = 0; i < k; ++i) in.children.push_back({q[i], cost[i], weight[i], eta[i], delta[i]});
    const mts::ProjectionOutput o = mts::project_node(in);
    for (size_t i = 0; i < k; ++i) {
      p[i] = o.p[i];
      alpha[i] = o.alpha[i];
    }
    *beta = o.beta;
    return MTS_OK;
  });
}

}  // extern "C"
