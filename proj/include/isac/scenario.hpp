#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isac/errors.hpp"
#include "isac/linalg.hpp"
#include "isac/random.hpp"

namespace isac {

// Mode selected by the source in each slot: attempt to receive a measurement,
// or push the remote estimate to the base station.
enum class ModeAction : int { Sense = 0, Communicate = 1 };

inline int mode_index(ModeAction u) { return static_cast<int>(u); }

inline const char* mode_name(ModeAction u) {
  return u == ModeAction::Sense ? "sense" : "communicate";
}

// Outcome of one slot's link usage; `success` is the erasure indicator.
struct LinkOutcome {
  bool success = false;
};

// Problem data for one control task over an unreliable link.
//
// Dynamics      x_{k+1} = A x_k + B a_k + w_k,   w_k ~ N(0, W)
// Measurements  y_k     = C x_k + v_k,           v_k ~ N(0, V)
// Initial state x_0 ~ N(m0, M0).
//
// Slots run k = 0..horizon; the terminal state x_{horizon+1} is penalized by
// the last entry of omega_x. Sensing succeeds with probability lambda_s,
// communication with probability lambda_c.
struct ScenarioConfig {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix W;
  Matrix V;
  Vector m0;
  Matrix M0;
  double lambda_s = 0.0;
  double lambda_c = 0.0;
  int horizon = 0;
  std::vector<Matrix> omega_x;  // state weights, horizon + 2 entries
  std::vector<Matrix> omega_a;  // input weights, horizon + 1 entries

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  int output_dim() const { return static_cast<int>(C.rows()); }
};

inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           (x.size() == 0 || (x.array() == y.array()).all());
  };
  if (!(same(a.A, b.A) && same(a.B, b.B) && same(a.C, b.C) &&
        same(a.W, b.W) && same(a.V, b.V) && same(a.M0, b.M0))) {
    return false;
  }
  if (a.m0.size() != b.m0.size() ||
      (a.m0.size() != 0 && !(a.m0.array() == b.m0.array()).all())) {
    return false;
  }
  if (a.lambda_s != b.lambda_s || a.lambda_c != b.lambda_c ||
      a.horizon != b.horizon) {
    return false;
  }
  if (a.omega_x.size() != b.omega_x.size() ||
      a.omega_a.size() != b.omega_a.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.omega_x.size(); ++i) {
    if (!same(a.omega_x[i], b.omega_x[i])) return false;
  }
  for (std::size_t i = 0; i < a.omega_a.size(); ++i) {
    if (!same(a.omega_a[i], b.omega_a[i])) return false;
  }
  return true;
}

inline bool operator!=(const ScenarioConfig& a, const ScenarioConfig& b) {
  return !(a == b);
}

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }

  std::string joined_errors() const {
    std::string out;
    for (const auto& e : errors) {
      if (!out.empty()) out += "; ";
      out += e;
    }
    return out;
  }
};

inline ValidationReport validate(const ScenarioConfig& cfg) {
  ValidationReport report;
  auto fail = [&report](const std::string& message) {
    report.errors.push_back(message);
  };

  const auto n = cfg.A.rows();
  if (n == 0 || cfg.A.cols() != n) {
    fail("A: must be a nonempty square matrix");
    return report;  // nothing downstream is well defined without n
  }
  if (cfg.B.rows() != n || cfg.B.cols() < 1) {
    fail("B: must have one row per state and at least one column");
  }
  if (cfg.C.cols() != n || cfg.C.rows() < 1) {
    fail("C: must have one column per state and at least one row");
  }
  const auto m = cfg.B.cols();
  const auto p = cfg.C.rows();

  auto check_sym_pd = [&](const Matrix& x, Eigen::Index rows,
                          const std::string& field, bool strict) {
    if (x.rows() != rows || x.cols() != rows) {
      fail(field + ": expected " + std::to_string(rows) + "x" +
           std::to_string(rows));
      return;
    }
    if (!is_symmetric(x)) {
      fail(field + ": must be symmetric");
      return;
    }
    if (strict && !is_positive_definite(x)) {
      fail(field + ": must be positive definite");
    } else if (!strict && !is_positive_semidefinite(x)) {
      fail(field + ": must be positive semidefinite");
    }
  };

  check_sym_pd(cfg.W, n, "W", /*strict=*/true);
  check_sym_pd(cfg.V, p, "V", /*strict=*/true);
  check_sym_pd(cfg.M0, n, "M0", /*strict=*/true);
  if (cfg.m0.size() != n) {
    fail("m0: expected length " + std::to_string(n));
  }

  auto check_lambda = [&](double value, const std::string& field) {
    if (!(value >= 0.0 && value <= 1.0)) {
      std::ostringstream msg;
      msg << field << ": must lie in [0, 1] (got " << value << ")";
      fail(msg.str());
    }
  };
  check_lambda(cfg.lambda_s, "lambda_s");
  check_lambda(cfg.lambda_c, "lambda_c");

  if (cfg.horizon < 0) {
    fail("N: must be a nonnegative integer");
  } else {
    const auto nx = static_cast<std::size_t>(cfg.horizon) + 2;
    const auto na = static_cast<std::size_t>(cfg.horizon) + 1;
    if (cfg.omega_x.size() != nx) {
      fail("omega_x: expected " + std::to_string(nx) + " weights, got " +
           std::to_string(cfg.omega_x.size()));
    } else {
      for (std::size_t k = 0; k < nx; ++k) {
        check_sym_pd(cfg.omega_x[k], n, "omega_x[" + std::to_string(k) + "]",
                     /*strict=*/false);
      }
    }
    if (cfg.omega_a.size() != na) {
      fail("omega_a: expected " + std::to_string(na) + " weights, got " +
           std::to_string(cfg.omega_a.size()));
    } else {
      for (std::size_t k = 0; k < na; ++k) {
        check_sym_pd(cfg.omega_a[k], m, "omega_a[" + std::to_string(k) + "]",
                     /*strict=*/true);
      }
    }
  }

  if (cfg.lambda_c < cfg.lambda_s) {
    report.warnings.push_back(
        "lambda_c < lambda_s: communicating is less reliable than sensing; "
        "threshold structure of the optimal policy is not guaranteed");
  }
  return report;
}

namespace detail {

inline bool is_number_array(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) return false;
  for (const auto& e : j) {
    if (!e.is_number()) return false;
  }
  return true;
}

inline bool is_matrix_array(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) return false;
  for (const auto& e : j) {
    if (!is_number_array(e)) return false;
  }
  return true;
}

// Accepts a bare number (1x1 shorthand) or a nested row-major array.
inline Matrix json_to_matrix(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) {
    Matrix m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (is_matrix_array(j)) {
    const auto rows = j.size();
    const auto cols = j.front().size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (j[r].size() != cols) {
        throw ParseError(field + ": rows have inconsistent lengths");
      }
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            j[r][c].get<double>();
      }
    }
    return m;
  }
  throw ParseError(field +
                   ": expected a number or a nested array of numbers");
}

inline Vector json_to_vector(const nlohmann::json& j, const std::string& field) {
  if (j.is_number()) {
    Vector v(1);
    v(0) = j.get<double>();
    return v;
  }
  if (is_number_array(j)) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
  }
  throw ParseError(field + ": expected a number or an array of numbers");
}

// Weight sequences accept: a number or single matrix (held constant), a flat
// array of scalars (one 1x1 weight per slot), or an explicit list of
// matrices. `count` is the required sequence length.
inline std::vector<Matrix> json_to_weights(const nlohmann::json& j,
                                           const std::string& field,
                                           std::size_t count) {
  if (j.is_number() || is_matrix_array(j)) {
    return std::vector<Matrix>(count, json_to_matrix(j, field));
  }
  if (is_number_array(j)) {
    if (j.size() != count) {
      throw ParseError(field + ": expected " + std::to_string(count) +
                       " scalar weights, got " + std::to_string(j.size()));
    }
    std::vector<Matrix> out;
    out.reserve(count);
    for (const auto& e : j) {
      Matrix m(1, 1);
      m(0, 0) = e.get<double>();
      out.push_back(m);
    }
    return out;
  }
  if (j.is_array()) {
    if (j.size() != count) {
      throw ParseError(field + ": expected " + std::to_string(count) +
                       " weights, got " + std::to_string(j.size()));
    }
    std::vector<Matrix> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(json_to_matrix(j[i], field + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
  throw ParseError(field + ": expected a weight or a list of weights");
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace detail

// Parses and validates a scenario document. Scalar fields may stand in for
// 1x1 matrices; omega_x/omega_a may be a single weight applied to every slot.
// m0 defaults to zero and M0 to the identity. Unknown fields are rejected.
inline ScenarioConfig load_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario document is not valid JSON: ") +
                     e.what());
  }
  if (!j.is_object()) {
    throw ParseError("scenario document must be a JSON object");
  }

  static const std::set<std::string> known = {
      "A",  "B",  "C",  "W",       "V",        "m0",
      "M0", "N",  "lambda_s",      "lambda_c", "omega_x", "omega_a"};
  for (const auto& item : j.items()) {
    if (known.find(item.key()) == known.end()) {
      throw ParseError("unknown field '" + item.key() +
                       "' in scenario document");
    }
  }
  for (const char* field : {"A", "B", "C", "W", "V", "N", "lambda_s",
                            "lambda_c", "omega_x", "omega_a"}) {
    if (!j.contains(field)) {
      throw ParseError(std::string("missing required field '") + field + "'");
    }
  }

  ScenarioConfig cfg;
  cfg.A = detail::json_to_matrix(j["A"], "A");
  cfg.B = detail::json_to_matrix(j["B"], "B");
  cfg.C = detail::json_to_matrix(j["C"], "C");
  cfg.W = detail::json_to_matrix(j["W"], "W");
  cfg.V = detail::json_to_matrix(j["V"], "V");

  if (!j["N"].is_number_integer() || j["N"].get<long long>() < 0) {
    throw ParseError("N: must be a nonnegative integer");
  }
  cfg.horizon = j["N"].get<int>();

  if (!j["lambda_s"].is_number() || !j["lambda_c"].is_number()) {
    throw ParseError("lambda_s/lambda_c: must be numbers");
  }
  cfg.lambda_s = j["lambda_s"].get<double>();
  cfg.lambda_c = j["lambda_c"].get<double>();

  const auto n = cfg.A.rows();
  cfg.m0 = j.contains("m0") ? detail::json_to_vector(j["m0"], "m0")
                            : Vector::Zero(n).eval();
  cfg.M0 = j.contains("M0") ? detail::json_to_matrix(j["M0"], "M0")
                            : Matrix::Identity(n, n).eval();

  const auto count_x = static_cast<std::size_t>(cfg.horizon) + 2;
  const auto count_a = static_cast<std::size_t>(cfg.horizon) + 1;
  cfg.omega_x = detail::json_to_weights(j["omega_x"], "omega_x", count_x);
  cfg.omega_a = detail::json_to_weights(j["omega_a"], "omega_a", count_a);

  const auto report = validate(cfg);
  if (!report.ok()) {
    throw ValidationError(report.joined_errors());
  }
  return cfg;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("read failed for file: " + path);
  }
  return buffer.str();
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
  return load_scenario(read_text_file(path));
}

// Fully expanded JSON form: every matrix nested row-major, every weight
// sequence explicit. Semantically identical inputs serialize identically.
inline nlohmann::json to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["A"] = detail::matrix_to_json(cfg.A);
  j["B"] = detail::matrix_to_json(cfg.B);
  j["C"] = detail::matrix_to_json(cfg.C);
  j["W"] = detail::matrix_to_json(cfg.W);
  j["V"] = detail::matrix_to_json(cfg.V);
  j["m0"] = detail::vector_to_json(cfg.m0);
  j["M0"] = detail::matrix_to_json(cfg.M0);
  j["N"] = cfg.horizon;
  j["lambda_s"] = cfg.lambda_s;
  j["lambda_c"] = cfg.lambda_c;
  nlohmann::json wx = nlohmann::json::array();
  for (const auto& m : cfg.omega_x) wx.push_back(detail::matrix_to_json(m));
  nlohmann::json wa = nlohmann::json::array();
  for (const auto& m : cfg.omega_a) wa.push_back(detail::matrix_to_json(m));
  j["omega_x"] = wx;
  j["omega_a"] = wa;
  return j;
}

inline std::string serialize_scenario(const ScenarioConfig& cfg) {
  return to_json(cfg).dump(2);
}

// Canonical byte form used for digests: compact dump with keys in sorted
// order and shortest round-trip number formatting.
inline std::string canonical_scenario_text(const ScenarioConfig& cfg) {
  return to_json(cfg).dump();
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Content fingerprint of a scenario, stable under reformatting, key order,
// scalar shorthand, and constant-weight shorthand.
inline std::string config_digest(const ScenarioConfig& cfg) {
  const std::uint64_t h = fnv1a64(canonical_scenario_text(cfg));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// One slot's process and measurement noise, in that order.
inline std::pair<Vector, Vector> sample_disturbances(const ScenarioConfig& cfg,
                                                     RandomStream& stream) {
  Vector w = gaussian_vector(cholesky_lower(cfg.W), stream);
  Vector v = gaussian_vector(cholesky_lower(cfg.V), stream);
  return {std::move(w), std::move(v)};
}

inline LinkOutcome sample_link(ModeAction u, const ScenarioConfig& cfg,
                               RandomStream& stream) {
  const double p = (u == ModeAction::Sense) ? cfg.lambda_s : cfg.lambda_c;
  return LinkOutcome{stream.bernoulli(p)};
}

}  // namespace isac
