#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "isac/covariance.hpp"
#include "isac/errors.hpp"
#include "isac/gains.hpp"
#include "isac/linalg.hpp"
#include "isac/scenario.hpp"

namespace isac {

// Two stage costs within this tolerance of each other are treated as a tie,
// resolved in favor of sensing.
inline constexpr double kDecisionTieTolerance = 1e-12;

// Rectangular grid over scalar (P, Q) covariance pairs.
struct GridSpec {
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  int points_p = 0;
  int points_q = 0;
};

inline void validate_grid(const GridSpec& spec) {
  auto axis = [](double lo, double hi, int points, const char* name) {
    if (!(lo > 0.0)) {
      throw ValidationError(std::string(name) + " axis: lower bound must be positive");
    }
    if (!(hi > lo)) {
      throw ValidationError(std::string(name) +
                            " axis: upper bound must exceed lower bound");
    }
    if (points < 2) {
      throw ValidationError(std::string(name) +
                            " axis: at least two grid points are required");
    }
  };
  axis(spec.p_min, spec.p_max, spec.points_p, "p");
  axis(spec.q_min, spec.q_max, spec.points_q, "q");
}

struct Grid {
  GridSpec spec;
  Vector p;  // ascending node coordinates
  Vector q;
};

inline Vector linspace(double lo, double hi, int points) {
  Vector v(points);
  const double step = (hi - lo) / (points - 1);
  for (int i = 0; i < points; ++i) v(i) = lo + step * i;
  v(points - 1) = hi;
  return v;
}

inline Grid build_grid(const GridSpec& spec) {
  validate_grid(spec);
  return {spec, linspace(spec.p_min, spec.p_max, spec.points_p),
          linspace(spec.q_min, spec.q_max, spec.points_q)};
}

namespace detail {

inline void require_scalar(const ScenarioConfig& cfg) {
  if (cfg.state_dim() != 1 || cfg.input_dim() != 1 || cfg.output_dim() != 1) {
    throw DimensionError(
        "grid dynamic programming supports scalar scenarios only "
        "(state, input, and output dimensions must all be 1)");
  }
}

struct ScalarOps {
  double a;
  double w;
  double info;  // C^2 / V
};

inline ScalarOps scalar_ops(const ScenarioConfig& cfg) {
  require_scalar(cfg);
  return {cfg.A(0, 0), cfg.W(0, 0),
          cfg.C(0, 0) * cfg.C(0, 0) / cfg.V(0, 0)};
}

}  // namespace detail

// Default grid for stable scalar scenarios: both axes cover
// [0.05, max(3, ceil(1.5 * w / (1 - a^2)))] with 101 points, which bounds the
// open-loop covariance fixed point with headroom. Unstable dynamics have no
// fixed point, so explicit bounds are required there.
inline GridSpec default_grid(const ScenarioConfig& cfg) {
  const auto ops = detail::scalar_ops(cfg);
  if (std::abs(ops.a) >= 1.0) {
    throw ValidationError(
        "default grid bounds require |A| < 1; unstable dynamics make the "
        "open-loop covariance unbounded, pass explicit grid bounds");
  }
  const double fixed_point = ops.w / (1.0 - ops.a * ops.a);
  const double upper = std::max(3.0, std::ceil(1.5 * fixed_point));
  return {0.05, upper, 0.05, upper, 101, 101};
}

struct ValueTable {
  int stage = 0;
  Matrix v;  // points_p x points_q, v(i, j) = V_stage(p_i, q_j)
};

struct DecisionMap {
  int stage = 0;
  Eigen::MatrixXi u;  // 0 = Sense, 1 = Communicate
};

struct AdvantageSurface {
  int stage = 0;
  Matrix d;  // F(., Sense) - F(., Communicate); positive favors communicating
};

struct ClampCounter {
  std::uint64_t evaluations = 0;
  std::uint64_t clamped = 0;
};

namespace detail {

struct AxisPosition {
  int cell;       // index of the lower node of the bracketing cell
  double t;       // position within the cell, in [0, 1]
  bool clamped;   // query fell outside the axis range
};

inline AxisPosition locate(const Vector& coords, double x) {
  const int n = static_cast<int>(coords.size());
  if (x <= coords(0)) return {0, 0.0, x < coords(0)};
  if (x >= coords(n - 1)) return {n - 2, 1.0, x > coords(n - 1)};
  const double step = (coords(n - 1) - coords(0)) / (n - 1);
  int i = static_cast<int>((x - coords(0)) / step);
  i = std::clamp(i, 0, n - 2);
  while (i > 0 && x < coords(i)) --i;
  while (i < n - 2 && x >= coords(i + 1)) ++i;
  double t = (x - coords(i)) / (coords(i + 1) - coords(i));
  t = std::clamp(t, 0.0, 1.0);
  return {i, t, false};
}

// Linear interpolation clamped into [min(v0, v1), max(v0, v1)]. The clamp
// costs nothing in exact arithmetic but makes the composite interpolation
// monotone in floating point whenever the node values are monotone, which the
// structural guarantees on the value tables depend on.
inline double lerp_clamped(double v0, double v1, double t) {
  if (t <= 0.0) return v0;
  if (t >= 1.0) return v1;
  const double r = v0 + (v1 - v0) * t;
  const double lo = std::min(v0, v1);
  const double hi = std::max(v0, v1);
  return std::min(std::max(r, lo), hi);
}

}  // namespace detail

// Bilinear interpolation of a grid table at (pval, qval). Queries outside the
// grid are clamped to the boundary; `counter`, when given, tallies total and
// clamped evaluations.
inline double interpolate(const Matrix& table, const Grid& grid, double pval,
                          double qval, ClampCounter* counter = nullptr) {
  const auto ip = detail::locate(grid.p, pval);
  const auto iq = detail::locate(grid.q, qval);
  if (counter != nullptr) {
    ++counter->evaluations;
    if (ip.clamped || iq.clamped) ++counter->clamped;
  }
  const double low = detail::lerp_clamped(table(ip.cell, iq.cell),
                                          table(ip.cell, iq.cell + 1), iq.t);
  const double high = detail::lerp_clamped(table(ip.cell + 1, iq.cell),
                                           table(ip.cell + 1, iq.cell + 1), iq.t);
  return detail::lerp_clamped(low, high, ip.t);
}

inline double interpolate(const ValueTable& table, const Grid& grid,
                          double pval, double qval,
                          ClampCounter* counter = nullptr) {
  return interpolate(table.v, grid, pval, qval, counter);
}

namespace detail {

// Expected cost-to-go of choosing mode u with the three successor values
// already interpolated. Shared by the solver and the probe API so both
// produce bitwise-identical numbers.
inline double stage_value_core(double cost_now, ModeAction u, double lambda_s,
                               double lambda_c, double v_sense_ok,
                               double v_fail, double v_comm_ok) {
  if (u == ModeAction::Sense) {
    double r = cost_now;
    r += lambda_s * v_sense_ok;
    r += (1.0 - lambda_s) * v_fail;
    return r;
  }
  double r = cost_now;
  r += lambda_c * v_comm_ok;
  r += (1.0 - lambda_c) * v_fail;
  return r;
}

}  // namespace detail

// F_k(P, Q, u): the stage-k cost tr(Gamma_k P) plus the expected interpolated
// value of the stage-(k+1) table at the successor pair.
//   u = Sense        successors (phi(P), psi(Q)) w.p. lambda_s,
//                    (phi(P), phi(Q)) otherwise
//   u = Communicate  successors (phi(Q), phi(Q)) w.p. lambda_c,
//                    (phi(P), phi(Q)) otherwise
inline double stage_value(const ValueTable& next, const Grid& grid,
                          double pval, double qval, ModeAction u, int k,
                          const GainSchedule& gains, const ScenarioConfig& cfg,
                          ClampCounter* counter = nullptr) {
  const auto ops = detail::scalar_ops(cfg);
  const double gamma_k = gains.Gamma.at(static_cast<std::size_t>(k))(0, 0);
  const double p_open = phi_scalar(pval, ops.a, ops.w);
  const double q_open = phi_scalar(qval, ops.a, ops.w);
  const double q_sensed = psi_scalar(qval, ops.a, ops.w, ops.info);
  const double cost_now = gamma_k * pval;
  const double v_sense_ok = interpolate(next.v, grid, p_open, q_sensed, counter);
  const double v_fail = interpolate(next.v, grid, p_open, q_open, counter);
  const double v_comm_ok = interpolate(next.v, grid, q_open, q_open, counter);
  return detail::stage_value_core(cost_now, u, cfg.lambda_s, cfg.lambda_c,
                                  v_sense_ok, v_fail, v_comm_ok);
}

// Backward-induction solution over the grid.
struct DpSolution {
  Grid grid;
  std::vector<ValueTable> values;          // stages 0..N
  std::vector<DecisionMap> decisions;      // stages 0..N
  std::vector<AdvantageSurface> advantages;  // stages 0..N
  ClampCounter counter;

  // More than 0.1% of interpolation queries fell outside the grid.
  bool clamp_warning() const {
    return counter.evaluations > 0 && counter.clamped * 1000 > counter.evaluations;
  }

  double value_at(int k, double pval, double qval) const {
    return interpolate(values.at(static_cast<std::size_t>(k)).v, grid, pval, qval);
  }
};

// Solves the mode-selection problem by backward induction on the grid.
// Terminal stage: V_N(P, Q) = tr(Gamma_N P), decision Sense (a tie: both
// modes are equally useless with no slots left), advantage 0. Earlier stages
// minimize F_k over the two modes; ties within kDecisionTieTolerance resolve
// to Sense.
inline DpSolution solve_dp(const ScenarioConfig& cfg, const GridSpec& spec,
                           const GainSchedule& gains) {
  const auto ops = detail::scalar_ops(cfg);
  Grid grid = build_grid(spec);
  const int N = cfg.horizon;
  const int np = spec.points_p;
  const int nq = spec.points_q;

  DpSolution sol;
  sol.grid = grid;
  sol.values.resize(static_cast<std::size_t>(N) + 1);
  sol.decisions.resize(static_cast<std::size_t>(N) + 1);
  sol.advantages.resize(static_cast<std::size_t>(N) + 1);

  {
    const double gamma_terminal = gains.Gamma.at(static_cast<std::size_t>(N))(0, 0);
    Matrix v(np, nq);
    for (int i = 0; i < np; ++i) {
      const double row_value = gamma_terminal * grid.p(i);
      for (int j = 0; j < nq; ++j) v(i, j) = row_value;
    }
    sol.values[static_cast<std::size_t>(N)] = {N, std::move(v)};
    sol.decisions[static_cast<std::size_t>(N)] = {
        N, Eigen::MatrixXi::Zero(np, nq)};
    sol.advantages[static_cast<std::size_t>(N)] = {N, Matrix::Zero(np, nq)};
  }

  Vector p_open(np), q_open(nq), q_sensed(nq);
  for (int i = 0; i < np; ++i) p_open(i) = phi_scalar(grid.p(i), ops.a, ops.w);
  for (int j = 0; j < nq; ++j) {
    q_open(j) = phi_scalar(grid.q(j), ops.a, ops.w);
    q_sensed(j) = psi_scalar(grid.q(j), ops.a, ops.w, ops.info);
  }

  for (int k = N - 1; k >= 0; --k) {
    const Matrix& next = sol.values[static_cast<std::size_t>(k) + 1].v;
    const double gamma_k = gains.Gamma.at(static_cast<std::size_t>(k))(0, 0);
    Matrix v(np, nq);
    Matrix d(np, nq);
    Eigen::MatrixXi u(np, nq);
    for (int i = 0; i < np; ++i) {
      const double cost_now = gamma_k * grid.p(i);
      for (int j = 0; j < nq; ++j) {
        const double v_sense_ok =
            interpolate(next, grid, p_open(i), q_sensed(j), &sol.counter);
        const double v_fail =
            interpolate(next, grid, p_open(i), q_open(j), &sol.counter);
        const double v_comm_ok =
            interpolate(next, grid, q_open(j), q_open(j), &sol.counter);
        const double f_sense = detail::stage_value_core(
            cost_now, ModeAction::Sense, cfg.lambda_s, cfg.lambda_c,
            v_sense_ok, v_fail, v_comm_ok);
        const double f_comm = detail::stage_value_core(
            cost_now, ModeAction::Communicate, cfg.lambda_s, cfg.lambda_c,
            v_sense_ok, v_fail, v_comm_ok);
        const double advantage = f_sense - f_comm;
        u(i, j) = advantage > kDecisionTieTolerance ? 1 : 0;
        v(i, j) = std::min(f_sense, f_comm);
        d(i, j) = advantage;
      }
    }
    sol.values[static_cast<std::size_t>(k)] = {k, std::move(v)};
    sol.decisions[static_cast<std::size_t>(k)] = {k, std::move(u)};
    sol.advantages[static_cast<std::size_t>(k)] = {k, std::move(d)};
  }
  return sol;
}

// Interpolated switching advantage Delta_k(P, Q); positive values favor
// communicating.
inline double switching_advantage(const DpSolution& sol, int k, double pval,
                                  double qval) {
  return interpolate(sol.advantages.at(static_cast<std::size_t>(k)).d,
                     sol.grid, pval, qval);
}

// Threshold form of one decision map.
//   comm_threshold_in_p(j)  least p with Communicate in column q_j (+inf if
//                           the column never communicates)
//   sense_threshold_in_q(i) least q with Sense in row p_i (+inf if the row
//                           never senses)
struct Thresholds {
  Vector comm_threshold_in_p;
  Vector sense_threshold_in_q;
};

// Extracts thresholds, verifying that the Communicate set is upward closed in
// p along every column and the Sense set upward closed in q along every row.
inline Thresholds extract_thresholds(const DecisionMap& map, const Grid& grid) {
  const auto& u = map.u;
  const int np = static_cast<int>(u.rows());
  const int nq = static_cast<int>(u.cols());
  const double inf = std::numeric_limits<double>::infinity();
  Thresholds th{Vector::Constant(nq, inf), Vector::Constant(np, inf)};

  for (int j = 0; j < nq; ++j) {
    int first = -1;
    for (int i = 0; i < np; ++i) {
      if (u(i, j) == 1) {
        first = i;
        break;
      }
    }
    if (first < 0) continue;
    for (int i = first; i < np; ++i) {
      if (u(i, j) != 1) {
        throw StructuralError(
            "decision map stage " + std::to_string(map.stage) +
                ": Communicate set is not upward closed in p within column " +
                std::to_string(j),
            j);
      }
    }
    th.comm_threshold_in_p(j) = grid.p(first);
  }

  for (int i = 0; i < np; ++i) {
    int first = -1;
    for (int j = 0; j < nq; ++j) {
      if (u(i, j) == 0) {
        first = j;
        break;
      }
    }
    if (first < 0) continue;
    for (int j = first; j < nq; ++j) {
      if (u(i, j) != 0) {
        throw StructuralError(
            "decision map stage " + std::to_string(map.stage) +
                ": Sense set is not upward closed in q within row " +
                std::to_string(i),
            i);
      }
    }
    th.sense_threshold_in_q(i) = grid.q(first);
  }
  return th;
}

}  // namespace isac
