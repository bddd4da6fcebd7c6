// Command-line front end: solve switching policies over the covariance grid,
// compute controller gains, and run seeded closed-loop simulations.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "isac/isac.hpp"

namespace {

isac::GridSpec parse_grid_flag(const std::string& text) {
  std::vector<std::string> parts;
  std::string token;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(token);
      token.clear();
    } else {
      token += c;
    }
  }
  parts.push_back(token);
  if (parts.size() != 6) {
    throw isac::ParseError(
        "--grid expects pmin,pmax,qmin,qmax,points_p,points_q");
  }
  try {
    isac::GridSpec spec;
    spec.p_min = std::stod(parts[0]);
    spec.p_max = std::stod(parts[1]);
    spec.q_min = std::stod(parts[2]);
    spec.q_max = std::stod(parts[3]);
    spec.points_p = std::stoi(parts[4]);
    spec.points_q = std::stoi(parts[5]);
    return spec;
  } catch (const std::exception&) {
    throw isac::ParseError(
        "--grid expects pmin,pmax,qmin,qmax,points_p,points_q");
  }
}

std::pair<double, double> parse_probe_flag(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw isac::ParseError("--probe expects p,q");
  }
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw isac::ParseError("--probe expects p,q");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sense/communicate switching for feedback control over an "
               "unreliable link"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir;
  std::string grid_flag;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario, "Scenario JSON file")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
  };

  // solve
  auto* solve = app.add_subcommand("solve", "Solve the switching problem on a "
                                            "covariance grid");
  add_common(solve);
  std::string stages = "0";
  std::string probe_flag;
  solve->add_option("--grid", grid_flag,
                    "Grid as pmin,pmax,qmin,qmax,points_p,points_q");
  solve->add_option("--stages", stages,
                    "Stages to export: 'all' or a comma-separated list");
  solve->add_option("--probe", probe_flag,
                    "Covariance pair p,q at which to report the solved value");

  // gains
  auto* gains = app.add_subcommand("gains", "Compute the controller schedule");
  add_common(gains);

  // simulate
  auto* simulate = app.add_subcommand("simulate",
                                      "Run seeded closed-loop episodes");
  add_common(simulate);
  std::string policy = "table";
  std::string solve_dir;
  long episodes = 1000;
  long trace_episodes = 0;
  double init_p = 0.0;
  simulate->add_option("--policy", policy,
                       "always-sense | always-comm | myopic | table | "
                       "periodic:<period>[:<phase>] | random:<p_comm>");
  simulate->add_option("--solve-dir", solve_dir,
                       "Directory of solve outputs (required for 'table')");
  simulate->add_option("--episodes", episodes, "Number of episodes");
  simulate->add_option("--seed", seed, "Base seed");
  simulate->add_option("--traces", trace_episodes,
                       "Write per-slot traces for the first n episodes");
  auto* init_p_opt = simulate->add_option(
      "--init-p", init_p, "Override the initial source covariance (scalar)");

  // compare
  auto* compare = app.add_subcommand("compare",
                                     "Evaluate several policies on common "
                                     "random numbers");
  add_common(compare);
  std::vector<std::string> policies;
  compare->add_option("--policy", policies,
                      "Policy to evaluate (repeatable)")
      ->take_all();
  compare->add_option("--solve-dir", solve_dir,
                      "Directory of solve outputs (required for 'table')");
  compare->add_option("--episodes", episodes, "Number of episodes");
  compare->add_option("--seed", seed, "Base seed");
  auto* cmp_init_p_opt = compare->add_option(
      "--init-p", init_p, "Override the initial source covariance (scalar)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? isac::kExitOk : isac::kExitInputError;
  }

  try {
    if (solve->parsed()) {
      isac::SolveArgs args;
      args.scenario_path = scenario;
      args.out_dir = out_dir;
      if (!grid_flag.empty()) args.grid = parse_grid_flag(grid_flag);
      args.stages = stages;
      if (!probe_flag.empty()) args.probe = parse_probe_flag(probe_flag);
      return isac::cmd_solve(args);
    }
    if (gains->parsed()) {
      isac::GainsArgs args;
      args.scenario_path = scenario;
      args.out_dir = out_dir;
      return isac::cmd_gains(args);
    }
    if (simulate->parsed()) {
      isac::SimulateArgs args;
      args.scenario_path = scenario;
      args.out_dir = out_dir;
      args.policy = policy;
      if (!solve_dir.empty()) args.solve_dir = solve_dir;
      args.episodes = episodes;
      args.seed = seed;
      args.trace_episodes = trace_episodes;
      if (init_p_opt->count() > 0) args.init_p = init_p;
      return isac::cmd_simulate(args);
    }
    if (compare->parsed()) {
      isac::CompareArgs args;
      args.scenario_path = scenario;
      args.out_dir = out_dir;
      args.policies = policies;
      if (!solve_dir.empty()) args.solve_dir = solve_dir;
      args.episodes = episodes;
      args.seed = seed;
      if (cmp_init_p_opt->count() > 0) args.init_p = init_p;
      return isac::cmd_compare(args);
    }
  } catch (const isac::ParseError& e) {
    std::cerr << "isacctl: " << e.what() << '\n';
    return isac::kExitInputError;
  }
  return isac::kExitInputError;
}
