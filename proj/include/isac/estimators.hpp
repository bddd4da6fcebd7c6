#pragma once

#include <optional>
#include <utility>

#include "isac/covariance.hpp"
#include "isac/errors.hpp"
#include "isac/linalg.hpp"
#include "isac/scenario.hpp"

namespace isac {

// Measurement delivered to the base station, present only in slots following
// a successful sensing attempt (and at slot 0, by convention).
struct Measurement {
  std::optional<Vector> y;
};

// Message delivered to the source: the base station's estimate and error
// covariance from the slot the message was sent in.
struct Message {
  struct Payload {
    Vector xhat_b;
    Matrix Qcov;
  };
  std::optional<Payload> payload;
};

struct BaseStationBelief {
  Vector xhat;  // remote estimate of the plant state
  Matrix Qcov;  // its error covariance
};

struct SourceBelief {
  Vector xhat;  // estimate used by the controller
  Matrix Pcov;  // its error covariance
};

namespace detail {

// V^{-1} C, so that the Kalman gain is Q C^T V^{-1} = Q (V^{-1} C)^T.
inline Matrix vinv_c(const ScenarioConfig& cfg) {
  return solve_spd(cfg.V, cfg.C);
}

}  // namespace detail

// Base-station belief at slot 0. The initial measurement y_0 is delivered by
// convention, so the prior N(m0, M0) is immediately updated:
//   Q_0 = (M0^{-1} + C^T V^{-1} C)^{-1},  xhat_0 = m0 + K_0 (y_0 - C m0).
inline BaseStationBelief bs_init(const ScenarioConfig& cfg,
                                 const Measurement& y0) {
  if (!y0.y.has_value()) {
    throw ContractError("bs_init: the slot-0 measurement is always delivered "
                        "and its payload must be present");
  }
  const Matrix q0 =
      symmetrize(inverse_spd(inverse_spd(cfg.M0) + information_gain(cfg)));
  const Matrix gain = q0 * detail::vinv_c(cfg).transpose();
  Vector xhat = cfg.m0 + gain * (*y0.y - cfg.C * cfg.m0);
  return {std::move(xhat), q0};
}

// Advances the base-station belief from slot k to k+1 given the slot-k action
// a_k and mode/link outcome, and the slot-(k+1) measurement when one was
// delivered. The payload must be present iff u = Sense and the link
// succeeded; the covariance update never reads the payload's value.
inline BaseStationBelief bs_step(const BaseStationBelief& belief,
                                 const Vector& action, ModeAction u,
                                 LinkOutcome g, const Measurement& y,
                                 const ScenarioConfig& cfg) {
  const bool delivered = (u == ModeAction::Sense) && g.success;
  if (delivered != y.y.has_value()) {
    throw ContractError(
        "bs_step: measurement payload must be present iff the preceding slot "
        "was a successful sensing attempt");
  }
  Vector predicted = cfg.A * belief.xhat + cfg.B * action;
  if (!delivered) {
    return {std::move(predicted), phi(belief.Qcov, cfg)};
  }
  Matrix q_next = psi(belief.Qcov, cfg);
  const Matrix gain = q_next * detail::vinv_c(cfg).transpose();
  const Vector innovation = *y.y - cfg.C * predicted;
  Vector updated = predicted + gain * innovation;
  return {std::move(updated), std::move(q_next)};
}

// Advances the source belief from slot k to k+1. The message payload must be
// present iff u = Communicate and the link succeeded; on delivery the source
// adopts the base station's estimate,
//   xhat_{k+1} = A xhat_k + B a_k + A (xhat_b_k - xhat_k),
//   P_{k+1}    = phi(Q_k),
// and otherwise propagates open loop with P_{k+1} = phi(P_k).
inline SourceBelief src_step(const SourceBelief& belief, const Vector& action,
                             ModeAction u, LinkOutcome g, const Message& z,
                             const ScenarioConfig& cfg) {
  const bool delivered = (u == ModeAction::Communicate) && g.success;
  if (delivered != z.payload.has_value()) {
    throw ContractError(
        "src_step: message payload must be present iff the preceding slot was "
        "a successful communication attempt");
  }
  Vector predicted = cfg.A * belief.xhat + cfg.B * action;
  if (!delivered) {
    return {std::move(predicted), phi(belief.Pcov, cfg)};
  }
  const Vector gap = z.payload->xhat_b - belief.xhat;
  Vector updated = predicted + cfg.A * gap;
  return {std::move(updated), phi(z.payload->Qcov, cfg)};
}

}  // namespace isac
