#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "isac/isac.hpp"

using isac::CovPair;
using isac::Matrix;
using isac::ModeAction;
using isac::RandomStream;
using testutil::make_scalar;
using testutil::mat1;

namespace {

CovPair scalar_pair(double p, double q) {
  return {mat1(p), mat1(q)};
}

}  // namespace

TEST_CASE("fixed policies produce their advertised mode sequences") {
  RandomStream s(1);
  const CovPair belief = scalar_pair(1.0, 1.0);

  isac::AlwaysSensePolicy sense;
  isac::AlwaysCommunicatePolicy comm;
  REQUIRE(sense.name() == "always-sense");
  REQUIRE(comm.name() == "always-comm");
  for (int k = 0; k < 5; ++k) {
    REQUIRE(sense.decide(belief, k, s) == ModeAction::Sense);
    REQUIRE(comm.decide(belief, k, s) == ModeAction::Communicate);
  }

  isac::PeriodicPolicy alternate(2);
  const ModeAction expected[6] = {ModeAction::Sense, ModeAction::Communicate,
                                  ModeAction::Sense, ModeAction::Communicate,
                                  ModeAction::Sense, ModeAction::Communicate};
  for (int k = 0; k < 6; ++k) {
    REQUIRE(alternate.decide(belief, k, s) == expected[k]);
  }
  REQUIRE(alternate.name() == "periodic:2");

  isac::PeriodicPolicy shifted(3, 1);
  REQUIRE(shifted.name() == "periodic:3:1");
  for (int k = 0; k < 9; ++k) {
    const bool comm_slot = (k % 3) == 1;
    REQUIRE(shifted.decide(belief, k, s) ==
            (comm_slot ? ModeAction::Communicate : ModeAction::Sense));
  }

  REQUIRE_THROWS_AS(isac::PeriodicPolicy(0), isac::ValidationError);
  REQUIRE_THROWS_AS(isac::PeriodicPolicy(2, -1), isac::ValidationError);
}

TEST_CASE("random policy respects its probability and its stream") {
  const CovPair belief = scalar_pair(1.0, 1.0);
  isac::RandomModePolicy never(0.0);
  isac::RandomModePolicy always(1.0);
  RandomStream s(7);
  for (int k = 0; k < 20; ++k) {
    REQUIRE(never.decide(belief, k, s) == ModeAction::Sense);
    REQUIRE(always.decide(belief, k, s) == ModeAction::Communicate);
  }
  REQUIRE(isac::RandomModePolicy(0.5).name() == "random:0.5");
  REQUIRE_THROWS_AS(isac::RandomModePolicy(1.5), isac::ValidationError);

  isac::RandomModePolicy half(0.5);
  int comm = 0;
  RandomStream draws(42);
  for (int k = 0; k < 10000; ++k) {
    if (half.decide(belief, k, draws) == ModeAction::Communicate) ++comm;
  }
  REQUIRE(std::abs(comm / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("myopic rule compares expected next-slot estimation costs") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);

  // phi(2.5) = 2.325 against 0.85 phi(0.1) + 0.15 phi(2.5) = 0.6726: stale
  // source knowledge and a fresh sensed estimate favor communicating.
  REQUIRE(isac::myopic_policy(mat1(2.5), mat1(0.1), 0, gains, cfg) ==
          ModeAction::Communicate);
  // Reversed: the source already knows more than the base station.
  REQUIRE(isac::myopic_policy(mat1(0.1), mat1(2.5), 0, gains, cfg) ==
          ModeAction::Sense);
  // Equal covariances: communicating can only match phi(P), ties go to Sense.
  REQUIRE(isac::myopic_policy(mat1(1.0), mat1(1.0), 0, gains, cfg) ==
          ModeAction::Sense);

  // A dead communication link removes any reason to communicate.
  auto dead = cfg;
  dead.lambda_c = 0.0;
  REQUIRE(isac::myopic_policy(mat1(2.5), mat1(0.1), 0, gains, dead) ==
          ModeAction::Sense);

  isac::MyopicPolicy policy(cfg, gains);
  REQUIRE(policy.name() == "myopic");
  RandomStream s(3);
  for (double p : {0.1, 0.9, 2.5}) {
    for (double q : {0.1, 0.9, 2.5}) {
      REQUIRE(policy.decide(scalar_pair(p, q), 5, s) ==
              isac::myopic_policy(mat1(p), mat1(q), 5, gains, cfg));
    }
  }
}

TEST_CASE("table policy plays back the decision maps by nearest node") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  const isac::GridSpec spec{0.05, 3.0, 0.05, 3.0, 101, 101};
  const auto sol = isac::solve_dp(cfg, spec, gains);
  const isac::TablePolicy policy(sol);
  RandomStream s(1);

  REQUIRE(policy.name() == "table");
  REQUIRE(policy.last_stage() == cfg.horizon);

  // Exact nodes reproduce the map;
  // off-node queries snap to the nearest node in each coordinate.
  const auto& u0 = sol.decisions[0].u;
  for (int i : {0, 30, 60, 100}) {
    for (int j : {0, 30, 60, 100}) {
      const ModeAction expected = u0(i, j) == 1 ? ModeAction::Communicate
                                                : ModeAction::Sense;
      REQUIRE(policy.decide(scalar_pair(sol.grid.p(i), sol.grid.q(j)), 0, s) ==
              expected);
    }
  }
  const double step = sol.grid.p(1) - sol.grid.p(0);
  const ModeAction snapped = policy.decide(
      scalar_pair(sol.grid.p(40) + 0.4 * step, sol.grid.q(10) - 0.3 * step), 0,
      s);
  REQUIRE(snapped == (u0(40, 10) == 1 ? ModeAction::Communicate
                                      : ModeAction::Sense));
  // Queries beyond the grid use the boundary node.
  REQUIRE(policy.decide(scalar_pair(100.0, sol.grid.q(0)), 0, s) ==
          (u0(100, 0) == 1 ? ModeAction::Communicate : ModeAction::Sense));

  REQUIRE_THROWS_AS(
      policy.decide({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, 0, s),
      isac::DimensionError);
  REQUIRE_THROWS_AS(policy.decide(scalar_pair(1.0, 1.0), cfg.horizon + 1, s),
                    isac::ContractError);

  auto bad_maps = sol.decisions;
  bad_maps[3].stage = 7;
  REQUIRE_THROWS_AS(isac::TablePolicy(sol.grid, bad_maps),
                    isac::ValidationError);
}

TEST_CASE("policy names parse into the matching policies") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  const isac::GridSpec spec{0.05, 3.0, 0.05, 3.0, 21, 21};
  const auto sol = isac::solve_dp(cfg, spec, gains);
  const isac::TablePolicy table(sol);

  REQUIRE(isac::make_policy("always-sense", cfg, gains, nullptr)->name() ==
          "always-sense");
  REQUIRE(isac::make_policy("always-comm", cfg, gains, nullptr)->name() ==
          "always-comm");
  REQUIRE(isac::make_policy("myopic", cfg, gains, nullptr)->name() == "myopic");
  REQUIRE(isac::make_policy("periodic:4", cfg, gains, nullptr)->name() ==
          "periodic:4");
  REQUIRE(isac::make_policy("periodic:4:2", cfg, gains, nullptr)->name() ==
          "periodic:4:2");
  REQUIRE(isac::make_policy("random:0.25", cfg, gains, nullptr)->name() ==
          "random:0.25");
  REQUIRE(isac::make_policy("table", cfg, gains, &table)->name() == "table");

  REQUIRE_THROWS_AS(isac::make_policy("bogus", cfg, gains, nullptr),
                    isac::ParseError);
  REQUIRE_THROWS_AS(isac::make_policy("periodic", cfg, gains, nullptr),
                    isac::ParseError);
  REQUIRE_THROWS_AS(isac::make_policy("periodic:x", cfg, gains, nullptr),
                    isac::ParseError);
  REQUIRE_THROWS_AS(isac::make_policy("random:", cfg, gains, nullptr),
                    isac::ParseError);
  REQUIRE_THROWS_AS(isac::make_policy("table", cfg, gains, nullptr),
                    isac::ValidationError);
}

TEST_CASE("episodes are reproducible and seed-sensitive") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  isac::RandomModePolicy policy(0.5);

  const auto a = isac::run_episode(cfg, gains, policy, 1234);
  const auto b = isac::run_episode(cfg, gains, policy, 1234);
  REQUIRE(a.slots.size() == b.slots.size());
  REQUIRE(a.full_cost == b.full_cost);
  REQUIRE(a.reduced_cost == b.reduced_cost);
  for (std::size_t k = 0; k < a.slots.size(); ++k) {
    REQUIRE(a.slots[k].x == b.slots[k].x);
    REQUIRE(a.slots[k].xhat_src == b.slots[k].xhat_src);
    REQUIRE(a.slots[k].xhat_bs == b.slots[k].xhat_bs);
    REQUIRE(a.slots[k].mode == b.slots[k].mode);
    REQUIRE(a.slots[k].link_success == b.slots[k].link_success);
  }
  REQUIRE(a.x_terminal == b.x_terminal);

  const auto c = isac::run_episode(cfg, gains, policy, 1235);
  REQUIRE(a.full_cost != c.full_cost);
}

TEST_CASE("a perfect link with pure sensing iterates the measurement update") {
  auto cfg = testutil::scalar_config();
  cfg.lambda_s = 1.0;
  const auto gains = isac::compute_gains(cfg);
  isac::AlwaysSensePolicy policy;
  const auto trace = isac::run_episode(cfg, gains, policy, 99);

  REQUIRE(trace.slots.size() == 51);
  Matrix q = isac::inverse_spd(isac::inverse_spd(cfg.M0) +
                               isac::information_gain(cfg));
  Matrix p = cfg.M0;
  for (std::size_t k = 0; k < trace.slots.size(); ++k) {
    REQUIRE(trace.slots[k].mode == ModeAction::Sense);
    REQUIRE(trace.slots[k].link_success);
    REQUIRE(testutil::bitwise_equal(trace.slots[k].Qcov, q));
    REQUIRE(testutil::bitwise_equal(trace.slots[k].Pcov, p));
    q = isac::psi(q, cfg);
    p = isac::phi(p, cfg);
  }
}

TEST_CASE("a dead link leaves both covariances on the open-loop recursion") {
  auto cfg = testutil::scalar_config();
  cfg.lambda_s = 0.0;
  cfg.lambda_c = 0.0;
  const auto gains = isac::compute_gains(cfg);
  isac::RandomModePolicy policy(0.5);
  const auto trace = isac::run_episode(cfg, gains, policy, 4);

  Matrix q = isac::inverse_spd(isac::inverse_spd(cfg.M0) +
                               isac::information_gain(cfg));
  Matrix p = cfg.M0;
  for (std::size_t k = 0; k < trace.slots.size(); ++k) {
    REQUIRE_FALSE(trace.slots[k].link_success);
    REQUIRE(testutil::bitwise_equal(trace.slots[k].Qcov, q));
    REQUIRE(testutil::bitwise_equal(trace.slots[k].Pcov, p));
    q = isac::phi(q, cfg);
    p = isac::phi(p, cfg);
  }
}

TEST_CASE("recorded covariances follow the transition map slot by slot") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  isac::RandomModePolicy policy(0.5);
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto trace = isac::run_episode(cfg, gains, policy, seed);
    for (std::size_t k = 0; k + 1 < trace.slots.size(); ++k) {
      const auto& slot = trace.slots[k];
      const CovPair next = isac::cov_transition(
          CovPair{slot.Pcov, slot.Qcov}, slot.mode,
          isac::LinkOutcome{slot.link_success}, cfg);
      REQUIRE(testutil::bitwise_equal(next.P, trace.slots[k + 1].Pcov));
      REQUIRE(testutil::bitwise_equal(next.Q, trace.slots[k + 1].Qcov));
    }
  }
}

TEST_CASE("the echoed estimator replica never drifts from the original") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  isac::RandomModePolicy policy(0.5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    REQUIRE(isac::run_episode(cfg, gains, policy, seed).mirror_gap == 0.0);
  }
}

TEST_CASE("recorded slots recompose the episode costs") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  isac::RandomModePolicy policy(0.5);
  const auto trace = isac::run_episode(cfg, gains, policy, 21);

  double full = 0.0;
  double reduced = 0.0;
  for (std::size_t k = 0; k < trace.slots.size(); ++k) {
    const auto& slot = trace.slots[k];
    full += slot.cost_state + slot.cost_action;
    reduced += slot.cost_reduced;
    // Each recorded component matches its definition at the recorded values.
    REQUIRE(slot.cost_state == slot.x.dot(cfg.omega_x[k] * slot.x));
    REQUIRE(slot.cost_action == slot.action.dot(cfg.omega_a[k] * slot.action));
    REQUIRE(slot.cost_reduced == (gains.Gamma[k] * slot.Pcov).trace());
    REQUIRE(slot.action == -(gains.L[k] * slot.xhat_src));
  }
  full += trace.terminal_state_cost;
  REQUIRE(trace.full_cost == full / (cfg.horizon + 1));
  REQUIRE(trace.reduced_cost == reduced);
  REQUIRE(trace.terminal_state_cost ==
          trace.x_terminal.dot(cfg.omega_x.back() * trace.x_terminal));
}

TEST_CASE("monte carlo summaries are deterministic and well-formed") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  isac::MyopicPolicy policy(cfg, gains);

  REQUIRE_THROWS_AS(isac::monte_carlo(cfg, gains, policy, 0, 1),
                    isac::ValidationError);

  std::vector<std::uint64_t> seen_seeds;
  const auto summary = isac::monte_carlo(
      cfg, gains, policy, 200, 77,
      [&](const isac::EpisodeTrace& t, long) { seen_seeds.push_back(t.seed); });
  REQUIRE(seen_seeds.size() == 200);
  for (std::size_t e = 0; e < seen_seeds.size(); ++e) {
    REQUIRE(seen_seeds[e] == isac::derive_seed(77, e));
  }

  const auto again = isac::monte_carlo(cfg, gains, policy, 200, 77);
  REQUIRE(summary.mean_full_cost == again.mean_full_cost);
  REQUIRE(summary.mean_reduced_cost == again.mean_reduced_cost);
  REQUIRE(summary.stderr_reduced_cost == again.stderr_reduced_cost);

  REQUIRE(summary.episodes == 200);
  REQUIRE(summary.base_seed == 77);
  REQUIRE(std::abs(summary.sense_fraction + summary.comm_fraction - 1.0) <
          1e-12);
  REQUIRE(summary.per_stage_reduced_mean.size() == 51);
  REQUIRE(summary.per_stage_mean_P.size() == 51);
  REQUIRE(summary.per_stage_mean_Q.size() == 51);
  // Slot 0 is deterministic: P_0 = M0 in every episode.
  REQUIRE(std::abs(summary.per_stage_mean_P[0](0, 0) - 1.0) < 1e-12);
  const double gamma0_m0 = (gains.Gamma[0] * cfg.M0).trace();
  REQUIRE(std::abs(summary.per_stage_reduced_mean[0] - gamma0_m0) <
          1e-12 * gamma0_m0);
  REQUIRE(summary.stderr_reduced_cost > 0.0);
  REQUIRE(summary.stderr_full_cost > 0.0);

  const auto single = isac::monte_carlo(cfg, gains, policy, 1, 5);
  REQUIRE(std::isnan(single.stderr_full_cost));
  REQUIRE(std::isnan(single.stderr_reduced_cost));
}

TEST_CASE("simulated reduced cost tracks the planned value on a short horizon") {
  auto cfg = testutil::scalar_config();
  cfg.horizon = 10;
  cfg.omega_x.assign(12, mat1(1.0));
  cfg.omega_a.assign(11, mat1(1.0));
  const auto gains = isac::compute_gains(cfg);
  const auto sol = isac::solve_dp(cfg, isac::default_grid(cfg), gains);
  const isac::TablePolicy policy(sol);

  const auto summary = isac::monte_carlo(cfg, gains, policy, 2000, 3);
  const double q0 = isac::inverse_spd(isac::inverse_spd(cfg.M0) +
                                      isac::information_gain(cfg))(0, 0);
  const double planned = sol.value_at(0, cfg.M0(0, 0), q0);
  const double tol =
      std::max(0.02 * planned, 5.0 * summary.stderr_reduced_cost);
  REQUIRE(std::abs(summary.mean_reduced_cost - planned) < tol);
}

TEST_CASE("a more reliable link lowers the estimation cost under shared noise") {
  const auto base_cfg = testutil::scalar_config();
  auto better_cfg = base_cfg;
  better_cfg.lambda_c = 0.95;
  const auto gains = isac::compute_gains(base_cfg);
  isac::AlwaysCommunicatePolicy policy;

  const auto base = isac::monte_carlo(base_cfg, gains, policy, 500, 17);
  const auto better = isac::monte_carlo(better_cfg, gains, policy, 500, 17);
  // Same uniforms decide both links, so every extra success only shrinks the
  // covariance path.
  REQUIRE(better.mean_reduced_cost < base.mean_reduced_cost);
}

TEST_CASE("measured costs match the closed-form decomposition") {
  const auto cfg = testutil::scalar_config();
  const auto gains = isac::compute_gains(cfg);
  isac::RandomModePolicy policy(0.5);
  const auto summary = isac::monte_carlo(cfg, gains, policy, 2000, 9);
  const auto report = isac::analytic_full_cost_check(cfg, gains, summary);

  REQUIRE(report.analytic_constant ==
          report.initial_mean_term + report.initial_cov_term +
              report.process_noise_term);
  REQUIRE(report.initial_mean_term == 0.0);  // m0 = 0
  REQUIRE(report.consistent);
  REQUIRE(std::abs(report.z_score) <= 3.0);
  REQUIRE(std::abs(report.reduced_from_stage_means - report.mean_reduced_cost) <
          1e-9 * report.mean_reduced_cost);
}

TEST_CASE("with no control channel the one-slot cost is exact in closed form") {
  // B = 0 and N = 0: the control does nothing, Gamma_0 = 0, and the full cost
  // is x_0^2 + x_1^2 with x_1 = A x_0 + w. Its expectation is
  //   (1 + A^2)(m0^2 + M0) + W = S_0 (m0^2 + M0) + S_1 W.
  const auto cfg = make_scalar(0.9, 0.0, 1.0, 0.3, 0.1, 0.5, 1.0, 0.8, 0.85, 0,
                               1.0, 1.0);
  const auto gains = isac::compute_gains(cfg);
  REQUIRE(gains.L[0](0, 0) == 0.0);
  REQUIRE(gains.Gamma[0](0, 0) == 0.0);

  const double mean_sq = 0.5 * 0.5 + 1.0;
  const double expected = (1.0 + 0.81) * mean_sq + 0.3;
  isac::AlwaysSensePolicy policy;
  const auto summary = isac::monte_carlo(cfg, gains, policy, 4000, 31);
  const auto report = isac::analytic_full_cost_check(cfg, gains, summary);

  REQUIRE(std::abs(report.analytic_constant - expected) < 1e-12 * expected);
  REQUIRE(summary.mean_reduced_cost == 0.0);
  REQUIRE(report.consistent);
  REQUIRE(std::abs(report.measured_gap_mean - expected) <=
          3.0 * report.measured_gap_stderr);
}
