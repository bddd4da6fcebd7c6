#pragma once

#include <utility>
#include <vector>

#include "isac/linalg.hpp"
#include "isac/scenario.hpp"

namespace isac {

// Error-covariance pair tracked by both sides of the link: P is the source's
// estimation error covariance, Q the base station's.
struct CovPair {
  Matrix P;
  Matrix Q;
};

// Open-loop covariance propagation: phi(X) = A X A^T + W.
inline Matrix phi(const Matrix& x, const ScenarioConfig& cfg) {
  return symmetrize(cfg.A * x * cfg.A.transpose() + cfg.W);
}

// Measurement information matrix C^T V^{-1} C.
inline Matrix information_gain(const ScenarioConfig& cfg) {
  return symmetrize(cfg.C.transpose() * solve_spd(cfg.V, cfg.C));
}

// Propagation followed by a measurement update, in information form:
// psi(X) = (phi(X)^{-1} + C^T V^{-1} C)^{-1}.
inline Matrix psi(const Matrix& x, const ScenarioConfig& cfg) {
  const Matrix predicted = phi(x, cfg);
  return symmetrize(inverse_spd(inverse_spd(predicted) + information_gain(cfg)));
}

// Scalar fast paths for the grid solver.
inline double phi_scalar(double x, double a, double w) { return a * a * x + w; }

inline double psi_scalar(double x, double a, double w, double info_gain) {
  const double predicted = phi_scalar(x, a, w);
  return 1.0 / (1.0 / predicted + info_gain);
}

// One-slot transition of (P, Q) given the chosen mode and link outcome.
// Sensing updates only Q; a delivered message resets P to the propagated Q.
inline CovPair cov_transition(const CovPair& s, ModeAction u, LinkOutcome g,
                              const ScenarioConfig& cfg) {
  if (u == ModeAction::Sense) {
    return {phi(s.P, cfg), g.success ? psi(s.Q, cfg) : phi(s.Q, cfg)};
  }
  Matrix q_next = phi(s.Q, cfg);
  Matrix p_next = g.success ? q_next : phi(s.P, cfg);
  return {std::move(p_next), std::move(q_next)};
}

// Distribution over successor pairs for mode u; zero-probability outcomes are
// omitted, and the success branch comes first when both are present.
inline std::vector<std::pair<double, CovPair>> expected_transitions(
    const CovPair& s, ModeAction u, const ScenarioConfig& cfg) {
  const double p = (u == ModeAction::Sense) ? cfg.lambda_s : cfg.lambda_c;
  std::vector<std::pair<double, CovPair>> out;
  if (p > 0.0) {
    out.emplace_back(p, cov_transition(s, u, LinkOutcome{true}, cfg));
  }
  if (p < 1.0) {
    out.emplace_back(1.0 - p, cov_transition(s, u, LinkOutcome{false}, cfg));
  }
  return out;
}

// Loewner order test: X <= Y up to tolerance, i.e. min eig(Y - X) >= -tol.
inline bool loewner_leq(const Matrix& x, const Matrix& y, double tol = 1e-9) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
  return min_eigenvalue(y - x) >= -tol;
}

}  // namespace isac
