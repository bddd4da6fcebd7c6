#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "isac/csv.hpp"
#include "isac/dp.hpp"
#include "isac/errors.hpp"
#include "isac/estimators.hpp"
#include "isac/gains.hpp"
#include "isac/manifest.hpp"
#include "isac/policy.hpp"
#include "isac/scenario.hpp"
#include "isac/simulate.hpp"
#include "isac/version.hpp"

namespace isac {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNumericalError = 2;
inline constexpr int kExitArtifactMismatch = 3;

struct SolveArgs {
  std::string scenario_path;
  std::string out_dir;
  std::optional<GridSpec> grid;
  std::string stages = "0";  // "all" or a comma-separated stage list
  std::optional<std::pair<double, double>> probe;
};

struct SimulateArgs {
  std::string scenario_path;
  std::string out_dir;
  std::string policy = "table";
  std::optional<std::string> solve_dir;
  long episodes = 1000;
  std::uint64_t seed = 0;
  long trace_episodes = 0;
  std::optional<double> init_p;
};

struct CompareArgs {
  std::string scenario_path;
  std::string out_dir;
  std::vector<std::string> policies;
  std::optional<std::string> solve_dir;
  long episodes = 1000;
  std::uint64_t seed = 0;
  std::optional<double> init_p;
};

struct GainsArgs {
  std::string scenario_path;
  std::string out_dir;
};

namespace detail {

template <typename Fn>
inline int guarded(const char* command, Fn&& body) {
  try {
    body();
    return kExitOk;
  } catch (const ArtifactMismatchError& e) {
    std::cerr << "isacctl " << command << ": " << e.what() << '\n';
    return kExitArtifactMismatch;
  } catch (const NumericalError& e) {
    std::cerr << "isacctl " << command << ": " << e.what() << '\n';
    return kExitNumericalError;
  } catch (const StructuralError& e) {
    std::cerr << "isacctl " << command << ": " << e.what() << '\n';
    return kExitNumericalError;
  } catch (const Error& e) {
    std::cerr << "isacctl " << command << ": " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "isacctl " << command << ": unexpected failure: " << e.what()
              << '\n';
    return kExitNumericalError;
  }
}

inline ScenarioConfig load_and_report(const std::string& path) {
  ScenarioConfig cfg = load_scenario_file(path);
  for (const auto& warning : validate(cfg).warnings) {
    std::cerr << "warning: " << warning << '\n';
  }
  return cfg;
}

inline std::vector<int> parse_stage_list(const std::string& text, int horizon) {
  std::set<int> stages;
  if (text == "all") {
    for (int k = 0; k <= horizon; ++k) stages.insert(k);
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      const std::string token = text.substr(pos, comma - pos);
      pos = comma + 1;
      if (token.empty()) {
        throw ParseError("--stages: empty entry in stage list");
      }
      int value = 0;
      try {
        std::size_t used = 0;
        value = std::stoi(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ParseError("--stages: '" + token + "' is not an integer");
      }
      if (value < 0 || value > horizon) {
        throw ParseError("--stages: stage " + std::to_string(value) +
                         " is outside 0.." + std::to_string(horizon));
      }
      stages.insert(value);
    }
  }
  return {stages.begin(), stages.end()};
}

// Probe point reported in the solve summary: the initial covariance pair
// (P_0, Q_0) implied by the prior, unless the caller supplied one.
inline std::pair<double, double> probe_point(const ScenarioConfig& cfg) {
  const double p0 = cfg.M0(0, 0);
  const Matrix q0 =
      inverse_spd(inverse_spd(cfg.M0) + information_gain(cfg));
  return {p0, q0(0, 0)};
}

struct OutputSet {
  std::vector<std::pair<std::string, std::string>> files;  // name, content

  void add(std::string name, std::string content) {
    files.emplace_back(std::move(name), std::move(content));
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(files.size());
    for (const auto& [name, content] : files) out.push_back(name);
    return out;
  }

  // Outputs are materialized only after every content string has been built,
  // so a failed run leaves no partial artifact directory behind.
  void write_all(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files) {
      write_text_file((std::filesystem::path(dir) / name).string(), content);
    }
  }
};

struct SolveArtifacts {
  Grid grid;
  std::vector<DecisionMap> decisions;
  RunManifest manifest;
};

inline SolveArtifacts load_solve_artifacts(const std::string& dir,
                                           const ScenarioConfig& cfg) {
  RunManifest manifest =
      load_manifest((std::filesystem::path(dir) / "manifest.json").string());
  const std::string current = config_digest(cfg);
  if (manifest.scenario_digest != current) {
    throw ArtifactMismatchError(
        "solve artifacts in " + dir + " were produced for scenario digest " +
        manifest.scenario_digest + " but the current scenario has digest " +
        current);
  }
  if (!manifest.grid.has_value()) {
    throw ParseError("run manifest in " + dir +
                     " lacks a grid specification");
  }
  Grid grid = build_grid(*manifest.grid);
  std::vector<DecisionMap> maps = parse_policy_csv(
      read_text_file((std::filesystem::path(dir) / "policy.csv").string()),
      grid);
  if (maps.empty()) {
    throw ParseError("policy table in " + dir + " is empty");
  }
  return {std::move(grid), std::move(maps), std::move(manifest)};
}

inline TablePolicy make_table_policy(const SolveArtifacts& artifacts,
                                     const ScenarioConfig& cfg) {
  TablePolicy policy(artifacts.grid, artifacts.decisions);
  if (policy.last_stage() != cfg.horizon) {
    throw ValidationError(
        "policy table covers stages 0.." + std::to_string(policy.last_stage()) +
        " but the scenario horizon requires 0.." +
        std::to_string(cfg.horizon));
  }
  return policy;
}

inline void apply_init_p(ScenarioConfig& cfg, double init_p) {
  if (!(init_p > 0.0)) {
    throw ValidationError("--init-p: must be positive");
  }
  const auto n = cfg.A.rows();
  cfg.M0 = (init_p * Matrix::Identity(n, n)).eval();
}

inline nlohmann::json summary_json(const ScenarioConfig& cfg,
                                   const std::string& policy_name,
                                   const CostSummary& s,
                                   const FullCostReport& report) {
  nlohmann::json j;
  j["policy"] = policy_name;
  j["episodes"] = s.episodes;
  j["base_seed"] = s.base_seed;
  j["mean_full_cost"] = s.mean_full_cost;
  j["stderr_full_cost"] = s.stderr_full_cost;
  j["mean_reduced_cost"] = s.mean_reduced_cost;
  j["stderr_reduced_cost"] = s.stderr_reduced_cost;
  j["sense_fraction"] = s.sense_fraction;
  j["comm_fraction"] = s.comm_fraction;
  j["decomposition_gap_mean"] = s.decomposition_gap_mean;
  j["decomposition_gap_stderr"] = s.decomposition_gap_stderr;
  j["per_stage_reduced_mean"] = s.per_stage_reduced_mean;
  nlohmann::json mean_p = nlohmann::json::array();
  for (const auto& m : s.per_stage_mean_P) mean_p.push_back(matrix_to_json(m));
  nlohmann::json mean_q = nlohmann::json::array();
  for (const auto& m : s.per_stage_mean_Q) mean_q.push_back(matrix_to_json(m));
  j["per_stage_mean_P"] = mean_p;
  j["per_stage_mean_Q"] = mean_q;
  j["full_cost_check"] = {
      {"initial_mean_term", report.initial_mean_term},
      {"initial_cov_term", report.initial_cov_term},
      {"process_noise_term", report.process_noise_term},
      {"analytic_constant", report.analytic_constant},
      {"measured_gap_mean", report.measured_gap_mean},
      {"measured_gap_stderr", report.measured_gap_stderr},
      {"z_score", report.z_score},
      {"consistent", report.consistent},
      {"reduced_from_stage_means", report.reduced_from_stage_means},
  };
  j["scenario_digest"] = config_digest(cfg);
  return j;
}

inline std::string traces_csv(const ScenarioConfig& cfg,
                              const std::vector<EpisodeTrace>& traces) {
  const int n = cfg.state_dim();
  const int m = cfg.input_dim();
  auto columns = [](const char* base, int dim) {
    std::string out;
    for (int i = 0; i < dim; ++i) {
      out += ',';
      out += base;
      if (dim > 1) out += "_" + std::to_string(i);
    }
    return out;
  };
  auto cov_columns = [](const char* base, int dim) {
    std::string out;
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        out += ',';
        out += base;
        if (dim > 1) out += "_" + std::to_string(r) + "_" + std::to_string(c);
      }
    }
    return out;
  };

  std::string out = "episode,k";
  out += columns("x", n);
  out += columns("xhat_src", n);
  out += columns("xhat_bs", n);
  out += cov_columns("P", n);
  out += cov_columns("Q", n);
  out += ",u,gamma";
  out += columns("a", m);
  out += ",stage_cost\n";

  auto append_vector = [&out](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out += ',';
      out += format_double(v(i));
    }
  };
  auto append_matrix = [&out](const Matrix& x) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        out += ',';
        out += format_double(x(r, c));
      }
    }
  };
  auto append_empty = [&out](int count) {
    for (int i = 0; i < count; ++i) out += ',';
  };

  for (std::size_t e = 0; e < traces.size(); ++e) {
    const EpisodeTrace& trace = traces[e];
    for (std::size_t k = 0; k < trace.slots.size(); ++k) {
      const SlotRecord& slot = trace.slots[k];
      out += std::to_string(e);
      out += ',';
      out += std::to_string(k);
      append_vector(slot.x);
      append_vector(slot.xhat_src);
      append_vector(slot.xhat_bs);
      append_matrix(slot.Pcov);
      append_matrix(slot.Qcov);
      out += ',';
      out += std::to_string(mode_index(slot.mode));
      out += ',';
      out += slot.link_success ? "1" : "0";
      append_vector(slot.action);
      out += ',';
      out += format_double(slot.cost_state + slot.cost_action);
      out += '\n';
    }
    // Terminal state row: only x and the terminal cost are defined.
    out += std::to_string(e);
    out += ',';
    out += std::to_string(trace.slots.size());
    append_vector(trace.x_terminal);
    append_empty(2 * n + 2 * n * n);
    append_empty(2);  // u, gamma
    append_empty(m);
    out += ',';
    out += format_double(trace.terminal_state_cost);
    out += '\n';
  }
  return out;
}

}  // namespace detail

// solve: backward induction over the covariance grid; writes value, decision,
// advantage, and threshold tables plus the full policy and a summary.
inline int cmd_solve(const SolveArgs& args) {
  return detail::guarded("solve", [&args] {
    const ScenarioConfig cfg = detail::load_and_report(args.scenario_path);
    const GainSchedule gains = compute_gains(cfg);

    GridSpec spec;
    if (args.grid.has_value()) {
      spec = *args.grid;
      validate_grid(spec);
      detail::require_scalar(cfg);
      if (std::abs(cfg.A(0, 0)) >= 1.0) {
        std::cerr << "warning: |A| >= 1, open-loop covariances grow without "
                     "bound and grid clamping will distort values near the "
                     "upper boundary\n";
      }
    } else {
      spec = default_grid(cfg);
    }

    const DpSolution sol = solve_dp(cfg, spec, gains);
    if (sol.clamp_warning()) {
      std::cerr << "warning: " << sol.counter.clamped << " of "
                << sol.counter.evaluations
                << " interpolation queries were clamped to the grid boundary; "
                   "enlarge the grid bounds\n";
    }

    const std::vector<int> stages =
        detail::parse_stage_list(args.stages, cfg.horizon);

    detail::OutputSet outputs;
    for (int k : stages) {
      const auto ku = static_cast<std::size_t>(k);
      outputs.add("value_" + std::to_string(k) + ".csv",
                  value_csv(sol.grid, sol.values[ku]));
      outputs.add("decision_" + std::to_string(k) + ".csv",
                  decision_csv(sol.grid, sol.decisions[ku]));
    }
    outputs.add("advantage_0.csv", advantage_csv(sol.grid, sol.advantages[0]));
    outputs.add("thresholds_0.csv",
                thresholds_csv(sol.grid,
                               extract_thresholds(sol.decisions[0], sol.grid)));
    outputs.add("policy.csv", policy_csv(sol.grid, sol.decisions));

    const auto probe = args.probe.has_value() ? *args.probe
                                              : detail::probe_point(cfg);
    nlohmann::json summary;
    summary["grid"] = grid_to_json(spec);
    summary["horizon"] = cfg.horizon;
    summary["scenario_digest"] = config_digest(cfg);
    summary["clamp"] = {{"evaluations", sol.counter.evaluations},
                        {"clamped", sol.counter.clamped},
                        {"warning", sol.clamp_warning()}};
    summary["probe"] = {{"p", probe.first},
                        {"q", probe.second},
                        {"value", sol.value_at(0, probe.first, probe.second)}};
    summary["stages_written"] = stages;
    outputs.add("summary.json", summary.dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "solve";
    manifest.scenario_digest = config_digest(cfg);
    manifest.grid = spec;
    manifest.created_utc = utc_timestamp_now();
    manifest.outputs = outputs.names();
    manifest.outputs.push_back("manifest.json");
    manifest.parameters = {{"stages", args.stages}};

    outputs.write_all(args.out_dir);
    save_manifest(
        (std::filesystem::path(args.out_dir) / "manifest.json").string(),
        manifest);
  });
}

// gains: certainty-equivalent controller schedule as CSV tables.
inline int cmd_gains(const GainsArgs& args) {
  return detail::guarded("gains", [&args] {
    const ScenarioConfig cfg = detail::load_and_report(args.scenario_path);
    const GainSchedule gains = compute_gains(cfg);

    auto schedule_csv = [](const std::vector<Matrix>& matrices,
                           const char* base) {
      std::string out = "t";
      const Matrix& first = matrices.front();
      for (Eigen::Index r = 0; r < first.rows(); ++r) {
        for (Eigen::Index c = 0; c < first.cols(); ++c) {
          out += ',';
          out += base;
          out += "_" + std::to_string(r) + "_" + std::to_string(c);
        }
      }
      out += '\n';
      for (std::size_t t = 0; t < matrices.size(); ++t) {
        out += std::to_string(t);
        for (Eigen::Index r = 0; r < matrices[t].rows(); ++r) {
          for (Eigen::Index c = 0; c < matrices[t].cols(); ++c) {
            out += ',';
            out += format_double(matrices[t](r, c));
          }
        }
        out += '\n';
      }
      return out;
    };

    detail::OutputSet outputs;
    outputs.add("S.csv", schedule_csv(gains.S, "S"));
    outputs.add("L.csv", schedule_csv(gains.L, "L"));
    outputs.add("Gamma.csv", schedule_csv(gains.Gamma, "Gamma"));

    RunManifest manifest;
    manifest.command = "gains";
    manifest.scenario_digest = config_digest(cfg);
    manifest.created_utc = utc_timestamp_now();
    manifest.outputs = outputs.names();
    manifest.outputs.push_back("manifest.json");

    outputs.write_all(args.out_dir);
    save_manifest(
        (std::filesystem::path(args.out_dir) / "manifest.json").string(),
        manifest);
  });
}

// simulate: seeded closed-loop Monte Carlo under one policy.
inline int cmd_simulate(const SimulateArgs& args) {
  return detail::guarded("simulate", [&args] {
    ScenarioConfig cfg = detail::load_and_report(args.scenario_path);

    std::optional<TablePolicy> table;
    if (args.policy == "table" || args.policy.rfind("table:", 0) == 0) {
      if (!args.solve_dir.has_value()) {
        throw ValidationError("policy 'table' requires --solve-dir");
      }
      // Artifact compatibility is judged against the scenario as given in
      // the file; the initial-covariance override below does not enter the
      // solved tables.
      const auto artifacts = detail::load_solve_artifacts(*args.solve_dir, cfg);
      table = detail::make_table_policy(artifacts, cfg);
    }
    if (args.init_p.has_value()) {
      detail::apply_init_p(cfg, *args.init_p);
    }

    const GainSchedule gains = compute_gains(cfg);
    const auto policy =
        make_policy(args.policy, cfg, gains, table ? &*table : nullptr);

    std::vector<EpisodeTrace> kept;
    const long keep = args.trace_episodes;
    auto observer = [&kept, keep](const EpisodeTrace& trace, long index) {
      if (index < keep) kept.push_back(trace);
    };
    const CostSummary summary = monte_carlo(cfg, gains, *policy,
                                            args.episodes, args.seed,
                                            keep > 0 ? observer : std::function<void(const EpisodeTrace&, long)>{});
    const FullCostReport report = analytic_full_cost_check(cfg, gains, summary);

    detail::OutputSet outputs;
    outputs.add("summary.json",
                detail::summary_json(cfg, policy->name(), summary, report)
                        .dump(2) +
                    "\n");
    if (keep > 0) {
      outputs.add("traces.csv", detail::traces_csv(cfg, kept));
    }

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.scenario_digest = config_digest(cfg);
    manifest.seed = args.seed;
    manifest.created_utc = utc_timestamp_now();
    manifest.outputs = outputs.names();
    manifest.outputs.push_back("manifest.json");
    manifest.parameters = {{"policy", args.policy},
                           {"episodes", args.episodes},
                           {"trace_episodes", args.trace_episodes}};
    if (args.init_p.has_value()) manifest.parameters["init_p"] = *args.init_p;
    if (args.solve_dir.has_value()) {
      manifest.parameters["solve_dir"] = *args.solve_dir;
    }

    outputs.write_all(args.out_dir);
    save_manifest(
        (std::filesystem::path(args.out_dir) / "manifest.json").string(),
        manifest);
  });
}

// compare: several policies on common random numbers, one CSV row each.
inline int cmd_compare(const CompareArgs& args) {
  return detail::guarded("compare", [&args] {
    ScenarioConfig cfg = detail::load_and_report(args.scenario_path);
    if (args.policies.empty()) {
      throw ValidationError("compare requires at least one --policy");
    }

    std::optional<TablePolicy> table;
    const bool wants_table =
        std::any_of(args.policies.begin(), args.policies.end(),
                    [](const std::string& p) { return p == "table"; });
    if (wants_table) {
      if (!args.solve_dir.has_value()) {
        throw ValidationError("policy 'table' requires --solve-dir");
      }
      const auto artifacts = detail::load_solve_artifacts(*args.solve_dir, cfg);
      table = detail::make_table_policy(artifacts, cfg);
    }
    if (args.init_p.has_value()) {
      detail::apply_init_p(cfg, *args.init_p);
    }

    const GainSchedule gains = compute_gains(cfg);

    std::string csv = "policy,mean_full,mean_reduced,stderr,comm_fraction\n";
    for (const auto& text : args.policies) {
      const auto policy =
          make_policy(text, cfg, gains, table ? &*table : nullptr);
      // Every policy sees the same episode seeds: common random numbers.
      const CostSummary summary =
          monte_carlo(cfg, gains, *policy, args.episodes, args.seed);
      csv += policy->name();
      csv += ',';
      csv += format_double(summary.mean_full_cost);
      csv += ',';
      csv += format_double(summary.mean_reduced_cost);
      csv += ',';
      csv += format_double(summary.stderr_reduced_cost);
      csv += ',';
      csv += format_double(summary.comm_fraction);
      csv += '\n';
    }

    detail::OutputSet outputs;
    outputs.add("compare.csv", csv);

    RunManifest manifest;
    manifest.command = "compare";
    manifest.scenario_digest = config_digest(cfg);
    manifest.seed = args.seed;
    manifest.created_utc = utc_timestamp_now();
    manifest.outputs = outputs.names();
    manifest.outputs.push_back("manifest.json");
    manifest.parameters = {{"policies", args.policies},
                           {"episodes", args.episodes}};
    if (args.init_p.has_value()) manifest.parameters["init_p"] = *args.init_p;

    outputs.write_all(args.out_dir);
    save_manifest(
        (std::filesystem::path(args.out_dir) / "manifest.json").string(),
        manifest);
  });
}

}  // namespace isac
