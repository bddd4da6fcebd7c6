#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "isac/covariance.hpp"
#include "isac/errors.hpp"
#include "isac/estimators.hpp"
#include "isac/gains.hpp"
#include "isac/policy.hpp"
#include "isac/random.hpp"
#include "isac/scenario.hpp"

namespace isac {

// Per-episode substream indices. Each episode derives five independent
// streams from its seed, one per noise source, so that changing the policy
// leaves every disturbance realization untouched (common random numbers):
// the link stream is consumed once per slot whichever mode is chosen, and the
// measurement stream once per slot whether or not the measurement is
// delivered.
inline constexpr std::uint64_t kInitStreamSalt = 0;
inline constexpr std::uint64_t kLinkStreamSalt = 1;
inline constexpr std::uint64_t kProcessStreamSalt = 2;
inline constexpr std::uint64_t kMeasurementStreamSalt = 3;
inline constexpr std::uint64_t kPolicyStreamSalt = 4;

struct SlotRecord {
  Vector x;          // plant state at the start of the slot
  Vector xhat_src;   // source estimate (controller side)
  Vector xhat_bs;    // base-station estimate
  Matrix Pcov;       // source error covariance
  Matrix Qcov;       // base-station error covariance
  Vector action;
  ModeAction mode = ModeAction::Sense;
  bool link_success = false;
  double cost_state = 0.0;    // x^T omega_x x
  double cost_action = 0.0;   // a^T omega_a a
  double cost_reduced = 0.0;  // tr(Gamma P)
};

struct EpisodeTrace {
  std::vector<SlotRecord> slots;  // k = 0..N
  Vector x_terminal;
  double terminal_state_cost = 0.0;
  double full_cost = 0.0;     // (sum of stage costs + terminal cost) / (N + 1)
  double reduced_cost = 0.0;  // sum of tr(Gamma_k P_k)
  double mirror_gap = 0.0;    // max deviation of the replicated source estimate
  std::uint64_t seed = 0;
};

// Runs one closed-loop episode under `policy` with certainty-equivalent
// control a_k = -L_k xhat_k. The base station maintains a replica of the
// source estimator, advanced with the same inputs it echoes to the source;
// `mirror_gap` records the largest deviation between replica and original
// (identically zero, since both run the same arithmetic on the same values).
inline EpisodeTrace run_episode(const ScenarioConfig& cfg,
                                const GainSchedule& gains,
                                const SwitchingPolicy& policy,
                                std::uint64_t seed) {
  const int N = cfg.horizon;

  RandomStream init_stream(derive_seed(seed, kInitStreamSalt));
  RandomStream link_stream(derive_seed(seed, kLinkStreamSalt));
  RandomStream process_stream(derive_seed(seed, kProcessStreamSalt));
  RandomStream measurement_stream(derive_seed(seed, kMeasurementStreamSalt));
  RandomStream policy_stream(derive_seed(seed, kPolicyStreamSalt));

  const Matrix chol_m0 = cholesky_lower(cfg.M0);
  const Matrix chol_w = cholesky_lower(cfg.W);
  const Matrix chol_v = cholesky_lower(cfg.V);

  Vector x = cfg.m0 + gaussian_vector(chol_m0, init_stream);
  Measurement y0{cfg.C * x + gaussian_vector(chol_v, init_stream)};

  SourceBelief src{cfg.m0, cfg.M0};
  SourceBelief mirror = src;
  BaseStationBelief bs = bs_init(cfg, y0);

  EpisodeTrace trace;
  trace.seed = seed;
  trace.slots.reserve(static_cast<std::size_t>(N) + 1);

  double full_acc = 0.0;
  double reduced_acc = 0.0;

  for (int k = 0; k <= N; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const ModeAction u =
        policy.decide(CovPair{src.Pcov, bs.Qcov}, k, policy_stream);
    const LinkOutcome link = sample_link(u, cfg, link_stream);

    const Vector action = -(gains.L[ku] * src.xhat);
    const Vector action_bs = -(gains.L[ku] * mirror.xhat);

    SlotRecord slot;
    slot.x = x;
    slot.xhat_src = src.xhat;
    slot.xhat_bs = bs.xhat;
    slot.Pcov = src.Pcov;
    slot.Qcov = bs.Qcov;
    slot.action = action;
    slot.mode = u;
    slot.link_success = link.success;
    slot.cost_state = x.dot(cfg.omega_x[ku] * x);
    slot.cost_action = action.dot(cfg.omega_a[ku] * action);
    slot.cost_reduced = (gains.Gamma[ku] * src.Pcov).trace();
    trace.slots.push_back(std::move(slot));

    full_acc += trace.slots.back().cost_state + trace.slots.back().cost_action;
    reduced_acc += trace.slots.back().cost_reduced;

    const Vector w = gaussian_vector(chol_w, process_stream);
    const Vector v = gaussian_vector(chol_v, measurement_stream);
    const Vector x_next = cfg.A * x + cfg.B * action + w;

    Measurement y;
    Message z;
    if (u == ModeAction::Sense && link.success) {
      y.y = cfg.C * x_next + v;
    }
    if (u == ModeAction::Communicate && link.success) {
      z.payload = Message::Payload{bs.xhat, bs.Qcov};
    }

    BaseStationBelief bs_next = bs_step(bs, action_bs, u, link, y, cfg);
    SourceBelief src_next = src_step(src, action, u, link, z, cfg);
    SourceBelief mirror_next = src_step(mirror, action_bs, u, link, z, cfg);

    const double gap =
        (mirror_next.xhat - src_next.xhat).cwiseAbs().maxCoeff();
    if (gap > trace.mirror_gap) trace.mirror_gap = gap;

    x = x_next;
    bs = std::move(bs_next);
    src = std::move(src_next);
    mirror = std::move(mirror_next);
  }

  trace.x_terminal = x;
  trace.terminal_state_cost =
      x.dot(cfg.omega_x[static_cast<std::size_t>(N) + 1] * x);
  full_acc += trace.terminal_state_cost;
  trace.full_cost = full_acc / (N + 1);
  trace.reduced_cost = reduced_acc;
  return trace;
}

namespace detail {

// Pairwise summation; truncation error grows with log(n) rather than n.
inline double pairwise_sum(const std::vector<double>& xs, std::size_t lo,
                           std::size_t hi) {
  const std::size_t n = hi - lo;
  if (n == 0) return 0.0;
  if (n == 1) return xs[lo];
  if (n == 2) return xs[lo] + xs[lo + 1];
  const std::size_t mid = lo + n / 2;
  return pairwise_sum(xs, lo, mid) + pairwise_sum(xs, mid, hi);
}

inline double pairwise_mean(const std::vector<double>& xs) {
  return pairwise_sum(xs, 0, xs.size()) / static_cast<double>(xs.size());
}

// Standard error of the mean; NaN for a single sample.
inline double standard_error(const std::vector<double>& xs, double mean) {
  const std::size_t n = xs.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq, 0, n) / static_cast<double>(n - 1);
  return std::sqrt(var / static_cast<double>(n));
}

}  // namespace detail

struct CostSummary {
  long episodes = 0;
  std::uint64_t base_seed = 0;
  double mean_full_cost = 0.0;
  double stderr_full_cost = 0.0;
  double mean_reduced_cost = 0.0;
  double stderr_reduced_cost = 0.0;
  double sense_fraction = 0.0;
  double comm_fraction = 0.0;
  // Mean of (N + 1) * full_cost - reduced_cost per episode; under the cost
  // decomposition this converges to a policy-independent constant.
  double decomposition_gap_mean = 0.0;
  double decomposition_gap_stderr = 0.0;
  std::vector<double> per_stage_reduced_mean;  // E[tr(Gamma_k P_k)]
  std::vector<Matrix> per_stage_mean_P;
  std::vector<Matrix> per_stage_mean_Q;
};

// Runs `episodes` independent episodes; episode i uses seed
// derive_seed(base_seed, i). The observer, when given, sees every trace in
// order.
inline CostSummary monte_carlo(
    const ScenarioConfig& cfg, const GainSchedule& gains,
    const SwitchingPolicy& policy, long episodes, std::uint64_t base_seed,
    const std::function<void(const EpisodeTrace&, long)>& observer = {}) {
  if (episodes < 1) {
    throw ValidationError("episodes: must be at least 1");
  }
  const int N = cfg.horizon;
  const auto slots = static_cast<std::size_t>(N) + 1;
  const auto count = static_cast<std::size_t>(episodes);

  std::vector<double> full(count), reduced(count), gap(count);
  std::vector<double> stage_reduced(slots, 0.0);
  std::vector<Matrix> stage_p(slots), stage_q(slots);
  for (std::size_t k = 0; k < slots; ++k) {
    stage_p[k] = Matrix::Zero(cfg.state_dim(), cfg.state_dim());
    stage_q[k] = Matrix::Zero(cfg.state_dim(), cfg.state_dim());
  }
  std::uint64_t comm_slots = 0;

  for (long e = 0; e < episodes; ++e) {
    const EpisodeTrace trace =
        run_episode(cfg, gains, policy, derive_seed(base_seed, static_cast<std::uint64_t>(e)));
    const auto i = static_cast<std::size_t>(e);
    full[i] = trace.full_cost;
    reduced[i] = trace.reduced_cost;
    gap[i] = trace.full_cost * (N + 1) - trace.reduced_cost;
    for (std::size_t k = 0; k < slots; ++k) {
      const SlotRecord& slot = trace.slots[k];
      stage_reduced[k] += slot.cost_reduced;
      stage_p[k] += slot.Pcov;
      stage_q[k] += slot.Qcov;
      if (slot.mode == ModeAction::Communicate) ++comm_slots;
    }
    if (observer) observer(trace, e);
  }

  CostSummary summary;
  summary.episodes = episodes;
  summary.base_seed = base_seed;
  summary.mean_full_cost = detail::pairwise_mean(full);
  summary.stderr_full_cost = detail::standard_error(full, summary.mean_full_cost);
  summary.mean_reduced_cost = detail::pairwise_mean(reduced);
  summary.stderr_reduced_cost =
      detail::standard_error(reduced, summary.mean_reduced_cost);
  summary.decomposition_gap_mean = detail::pairwise_mean(gap);
  summary.decomposition_gap_stderr =
      detail::standard_error(gap, summary.decomposition_gap_mean);

  const double total_slots = static_cast<double>(episodes) * static_cast<double>(slots);
  summary.comm_fraction = static_cast<double>(comm_slots) / total_slots;
  summary.sense_fraction = 1.0 - summary.comm_fraction;

  summary.per_stage_reduced_mean.resize(slots);
  summary.per_stage_mean_P.resize(slots);
  summary.per_stage_mean_Q.resize(slots);
  for (std::size_t k = 0; k < slots; ++k) {
    summary.per_stage_reduced_mean[k] =
        stage_reduced[k] / static_cast<double>(episodes);
    summary.per_stage_mean_P[k] = stage_p[k] / static_cast<double>(episodes);
    summary.per_stage_mean_Q[k] = stage_q[k] / static_cast<double>(episodes);
  }
  return summary;
}

// Closed-form part of the decomposed control cost:
//   (N + 1) E[full] = m0^T S_0 m0 + tr(S_0 M0) + sum_t tr(S_{t+1} W)
//                     + sum_k E[tr(Gamma_k P_k)].
// The first three terms do not depend on the switching policy; the report
// compares their sum against the measured gap.
struct FullCostReport {
  double initial_mean_term = 0.0;     // m0^T S_0 m0
  double initial_cov_term = 0.0;      // tr(S_0 M0)
  double process_noise_term = 0.0;    // sum_t tr(S_{t+1} W)
  double analytic_constant = 0.0;     // sum of the three terms above
  double measured_gap_mean = 0.0;
  double measured_gap_stderr = 0.0;
  double z_score = 0.0;
  bool consistent = false;            // |z| <= 3, or exact match
  double mean_reduced_cost = 0.0;
  double reduced_from_stage_means = 0.0;  // sum_k tr(Gamma_k mean(P_k))
};

inline FullCostReport analytic_full_cost_check(const ScenarioConfig& cfg,
                                               const GainSchedule& gains,
                                               const CostSummary& summary) {
  FullCostReport report;
  report.initial_mean_term = cfg.m0.dot(gains.S[0] * cfg.m0);
  report.initial_cov_term = (gains.S[0] * cfg.M0).trace();
  double noise = 0.0;
  for (int t = 0; t <= cfg.horizon; ++t) {
    noise += (gains.S[static_cast<std::size_t>(t) + 1] * cfg.W).trace();
  }
  report.process_noise_term = noise;
  report.analytic_constant =
      report.initial_mean_term + report.initial_cov_term + noise;

  report.measured_gap_mean = summary.decomposition_gap_mean;
  report.measured_gap_stderr = summary.decomposition_gap_stderr;
  const double diff = report.measured_gap_mean - report.analytic_constant;
  report.z_score = diff / report.measured_gap_stderr;
  const double scale = std::max(1.0, std::abs(report.analytic_constant));
  report.consistent =
      std::abs(diff) <= 1e-9 * scale || std::abs(report.z_score) <= 3.0;

  report.mean_reduced_cost = summary.mean_reduced_cost;
  double from_means = 0.0;
  for (std::size_t k = 0; k < summary.per_stage_mean_P.size(); ++k) {
    from_means += (gains.Gamma[k] * summary.per_stage_mean_P[k]).trace();
  }
  report.reduced_from_stage_means = from_means;
  return report;
}

}  // namespace isac
