#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "isac/errors.hpp"

namespace isac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Minimum-eigenvalue threshold for definiteness checks.
inline constexpr double kPsdTol = 1e-10;

inline Matrix symmetrize(const Matrix& x) {
  return 0.5 * (x + x.transpose());
}

inline double asymmetry(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  return (x - x.transpose()).cwiseAbs().maxCoeff();
}

inline bool is_symmetric(const Matrix& x, double tol = 1e-10) {
  if (x.rows() != x.cols() || x.size() == 0) return false;
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  return asymmetry(x) <= tol * scale;
}

// Smallest eigenvalue of the symmetric part of x.
inline double min_eigenvalue(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigenvalue computation failed");
  }
  return es.eigenvalues().minCoeff();
}

inline bool is_positive_definite(const Matrix& x) {
  return x.rows() == x.cols() && x.size() > 0 && min_eigenvalue(x) > kPsdTol;
}

inline bool is_positive_semidefinite(const Matrix& x) {
  return x.rows() == x.cols() && x.size() > 0 && min_eigenvalue(x) >= -kPsdTol;
}

inline Eigen::LLT<Matrix> spd_factor(const Matrix& x, const char* what) {
  Eigen::LLT<Matrix> llt(symmetrize(x));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("Cholesky factorization failed for ") + what);
  }
  return llt;
}

inline Matrix inverse_spd(const Matrix& x) {
  return spd_factor(x, "matrix inverse")
      .solve(Matrix::Identity(x.rows(), x.cols()));
}

// Solves a * x = b for symmetric positive definite a.
inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
  return spd_factor(a, "linear solve").solve(b);
}

inline Matrix cholesky_lower(const Matrix& x) {
  return spd_factor(x, "Cholesky square root").matrixL();
}

}  // namespace isac
