#pragma once

#include <vector>

#include "isac/errors.hpp"
#include "isac/linalg.hpp"
#include "isac/scenario.hpp"

namespace isac {

// Certainty-equivalent controller schedule.
//   S      Riccati matrices S_0..S_{N+1}
//   L      feedback gains, a_k = -L_k xhat_k, k = 0..N
//   Gamma  weights of the estimation-error cost, tr(Gamma_k P_k)
struct GainSchedule {
  std::vector<Matrix> S;
  std::vector<Matrix> L;
  std::vector<Matrix> Gamma;
};

// Backward Riccati recursion
//   S_t = omega_x_t + A^T S_{t+1} A
//         - A^T S_{t+1} B (B^T S_{t+1} B + omega_a_t)^{-1} B^T S_{t+1} A
// with S_{N+1} = omega_x_{N+1}.
inline std::vector<Matrix> riccati_backward(const ScenarioConfig& cfg) {
  const int N = cfg.horizon;
  std::vector<Matrix> S(static_cast<std::size_t>(N) + 2);
  S[static_cast<std::size_t>(N) + 1] = cfg.omega_x[static_cast<std::size_t>(N) + 1];
  for (int t = N; t >= 0; --t) {
    const Matrix& s_next = S[static_cast<std::size_t>(t) + 1];
    const Matrix cross = cfg.B.transpose() * s_next * cfg.A;           // B^T S A
    const Matrix curvature = cfg.B.transpose() * s_next * cfg.B +
                             cfg.omega_a[static_cast<std::size_t>(t)];
    S[static_cast<std::size_t>(t)] =
        symmetrize(cfg.omega_x[static_cast<std::size_t>(t)] +
                   cfg.A.transpose() * s_next * cfg.A -
                   cross.transpose() * solve_spd(curvature, cross));
  }
  return S;
}

// L_k = (B^T S_{k+1} B + omega_a_k)^{-1} B^T S_{k+1} A for k = 0..N.
inline std::vector<Matrix> feedback_gains(const ScenarioConfig& cfg,
                                          const std::vector<Matrix>& S) {
  const int N = cfg.horizon;
  std::vector<Matrix> L(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    const Matrix& s_next = S[static_cast<std::size_t>(k) + 1];
    const Matrix cross = cfg.B.transpose() * s_next * cfg.A;
    const Matrix curvature = cfg.B.transpose() * s_next * cfg.B +
                             cfg.omega_a[static_cast<std::size_t>(k)];
    L[static_cast<std::size_t>(k)] = solve_spd(curvature, cross);
  }
  return L;
}

// Gamma_k = A^T S_{k+1} B (B^T S_{k+1} B + omega_a_k)^{-1} B^T S_{k+1} A.
inline std::vector<Matrix> covariance_weights(const ScenarioConfig& cfg,
                                              const std::vector<Matrix>& S) {
  const int N = cfg.horizon;
  std::vector<Matrix> Gamma(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    const Matrix& s_next = S[static_cast<std::size_t>(k) + 1];
    const Matrix cross = cfg.B.transpose() * s_next * cfg.A;
    const Matrix curvature = cfg.B.transpose() * s_next * cfg.B +
                             cfg.omega_a[static_cast<std::size_t>(k)];
    Gamma[static_cast<std::size_t>(k)] =
        symmetrize(cross.transpose() * solve_spd(curvature, cross));
  }
  return Gamma;
}

inline GainSchedule compute_gains(const ScenarioConfig& cfg) {
  GainSchedule gains;
  gains.S = riccati_backward(cfg);
  gains.L = feedback_gains(cfg, gains.S);
  gains.Gamma = covariance_weights(cfg, gains.S);
  return gains;
}

}  // namespace isac
