#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "isac/isac.hpp"

using isac::compute_gains;
using isac::Matrix;
using testutil::make_scalar;

TEST_CASE("one backward step from a unit terminal weight") {
  // S_1 = 1, so S_0 = 1 + 0.81 - 0.81 / 2 = 1.405, L_0 = 0.45,
  // Gamma_0 = 0.405; worked by hand from the recursion.
  const auto cfg = make_scalar(0.9, 1.0, 1.0, 0.3, 0.1, 0.0, 1.0, 0.8, 0.85,
                               /*horizon=*/0, 1.0, 1.0);
  const auto gains = compute_gains(cfg);
  REQUIRE(gains.S.size() == 2);
  REQUIRE(gains.L.size() == 1);
  REQUIRE(gains.Gamma.size() == 1);
  REQUIRE(gains.S[1](0, 0) == 1.0);
  REQUIRE(std::abs(gains.S[0](0, 0) - 1.405) < 1e-15);
  REQUIRE(std::abs(gains.L[0](0, 0) - 0.45) < 1e-15);
  REQUIRE(std::abs(gains.Gamma[0](0, 0) - 0.405) < 1e-15);
}

TEST_CASE("uncontrolled systems reduce to pure weight accumulation") {
  const auto cfg = make_scalar(0.9, 0.0, 1.0, 0.3, 0.1, 0.0, 1.0, 0.8, 0.85,
                               /*horizon=*/5, 1.0, 1.0);
  const auto gains = compute_gains(cfg);
  // With B = 0 the recursion is S_t = omega + A^T S_{t+1} A and the gain
  // terms vanish.
  double expected = 1.0;
  for (int t = 5; t >= 0; --t) {
    expected = 1.0 + 0.81 * expected;
    REQUIRE(std::abs(gains.S[static_cast<std::size_t>(t)](0, 0) - expected) <
            1e-12);
  }
  for (const auto& l : gains.L) REQUIRE(l(0, 0) == 0.0);
  for (const auto& g : gains.Gamma) REQUIRE(std::abs(g(0, 0)) < 1e-15);
}

TEST_CASE("long-horizon Riccati matrix reaches the stationary point") {
  // The stationary equation for the benchmark parameters reduces to
  // S^2 - 0.81 S - 1 = 0; the quadratic formula gives the positive root.
  const auto cfg = testutil::scalar_config();
  const auto gains = compute_gains(cfg);
  const double root = (0.81 + std::sqrt(0.81 * 0.81 + 4.0)) / 2.0;
  REQUIRE(std::abs(gains.S[0](0, 0) - root) < 1e-6);
}

TEST_CASE("terminal condition is stored exactly") {
  auto cfg = testutil::scalar_config();
  cfg.omega_x.back() = testutil::mat1(2.5);
  const auto gains = compute_gains(cfg);
  REQUIRE(gains.S.back()(0, 0) == 2.5);
  REQUIRE(testutil::bitwise_equal(gains.S.back(), cfg.omega_x.back()));
}

TEST_CASE("schedule invariants hold along the benchmark horizon") {
  const auto cfg = testutil::scalar_config();
  const auto gains = compute_gains(cfg);
  const int N = cfg.horizon;
  REQUIRE(gains.S.size() == static_cast<std::size_t>(N) + 2);
  REQUIRE(gains.L.size() == static_cast<std::size_t>(N) + 1);
  REQUIRE(gains.Gamma.size() == static_cast<std::size_t>(N) + 1);

  for (const auto& s : gains.S) {
    REQUIRE(isac::is_symmetric(s));
    REQUIRE(isac::is_positive_semidefinite(s));
  }
  for (const auto& g : gains.Gamma) {
    REQUIRE(isac::is_symmetric(g));
    REQUIRE(isac::is_positive_semidefinite(g));
  }

  for (int k = 0; k <= N; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    // Gamma_k must equal L_k^T (B^T S_{k+1} B + omega_a_k) L_k.
    const Matrix curvature = cfg.B.transpose() * gains.S[ku + 1] * cfg.B +
                             cfg.omega_a[ku];
    const Matrix recomposed =
        gains.L[ku].transpose() * curvature * gains.L[ku];
    const double scale = std::max(1.0, gains.Gamma[ku].cwiseAbs().maxCoeff());
    REQUIRE((gains.Gamma[ku] - recomposed).cwiseAbs().maxCoeff() <
            1e-9 * scale);

    // Gamma_k also equals the Riccati decrement A^T S_{k+1} A - S_k + omega_x_k.
    const Matrix decrement = cfg.A.transpose() * gains.S[ku + 1] * cfg.A -
                             gains.S[ku] + cfg.omega_x[ku];
    REQUIRE((gains.Gamma[ku] - decrement).cwiseAbs().maxCoeff() <
            1e-9 * scale);
  }
}

TEST_CASE("multivariable schedules satisfy the same invariants") {
  isac::ScenarioConfig cfg;
  cfg.A.resize(2, 2);
  cfg.A << 0.9, 0.2, -0.1, 0.7;
  cfg.B.resize(2, 1);
  cfg.B << 1.0, 0.5;
  cfg.C.resize(1, 2);
  cfg.C << 1.0, 0.0;
  cfg.W.resize(2, 2);
  cfg.W << 0.3, 0.05, 0.05, 0.2;
  cfg.V = testutil::mat1(0.1);
  cfg.m0 = isac::Vector::Zero(2);
  cfg.M0 = isac::Matrix::Identity(2, 2);
  cfg.lambda_s = 0.8;
  cfg.lambda_c = 0.85;
  cfg.horizon = 12;
  isac::Matrix wx(2, 2);
  wx << 1.0, 0.0, 0.0, 2.0;
  cfg.omega_x.assign(14, wx);
  cfg.omega_a.assign(13, testutil::mat1(1.0));
  REQUIRE(isac::validate(cfg).ok());

  const auto gains = compute_gains(cfg);
  REQUIRE(testutil::bitwise_equal(gains.S.back(), wx));
  for (std::size_t k = 0; k < gains.Gamma.size(); ++k) {
    REQUIRE(isac::is_symmetric(gains.S[k]));
    REQUIRE(isac::is_positive_semidefinite(gains.Gamma[k]));
    const Matrix curvature =
        cfg.B.transpose() * gains.S[k + 1] * cfg.B + cfg.omega_a[k];
    const Matrix recomposed = gains.L[k].transpose() * curvature * gains.L[k];
    const double scale = std::max(1.0, gains.Gamma[k].cwiseAbs().maxCoeff());
    REQUIRE((gains.Gamma[k] - recomposed).cwiseAbs().maxCoeff() < 1e-9 * scale);
  }
}

TEST_CASE("a heavier terminal weight never shrinks the Riccati matrices") {
  auto base = testutil::scalar_config();
  auto heavy = base;
  heavy.omega_x.back() = testutil::mat1(2.0);
  const auto g0 = compute_gains(base);
  const auto g1 = compute_gains(heavy);
  for (std::size_t t = 0; t < g0.S.size(); ++t) {
    REQUIRE(isac::loewner_leq(g0.S[t], g1.S[t], 1e-9));
  }
}

TEST_CASE("gain computation is deterministic") {
  const auto cfg = testutil::scalar_config();
  const auto a = compute_gains(cfg);
  const auto b = compute_gains(cfg);
  for (std::size_t t = 0; t < a.S.size(); ++t) {
    REQUIRE(testutil::bitwise_equal(a.S[t], b.S[t]));
  }
  for (std::size_t k = 0; k < a.L.size(); ++k) {
    REQUIRE(testutil::bitwise_equal(a.L[k], b.L[k]));
    REQUIRE(testutil::bitwise_equal(a.Gamma[k], b.Gamma[k]));
  }
}
