#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "isac/isac.hpp"

namespace testutil {

// Scalar benchmark scenario used throughout the tests: marginally slow
// dynamics, noisy link, sensing slightly less reliable than communicating.
inline const char* scalar_scenario_text() {
  return R"({
    "A": 0.9, "B": 1.0, "C": 1.0, "W": 0.3, "V": 0.1,
    "m0": 0.0, "M0": 1.0, "N": 50,
    "lambda_s": 0.8, "lambda_c": 0.85,
    "omega_x": 1.0, "omega_a": 1.0
  })";
}

inline isac::ScenarioConfig scalar_config() {
  return isac::load_scenario(scalar_scenario_text());
}

inline isac::Matrix mat1(double x) {
  isac::Matrix m(1, 1);
  m(0, 0) = x;
  return m;
}

inline isac::Vector vec1(double x) {
  isac::Vector v(1);
  v(0) = x;
  return v;
}

// Scalar scenario built directly, for edge cases the JSON samples don't
// cover (B = 0, N = 0, degenerate link probabilities, ...).
inline isac::ScenarioConfig make_scalar(double a, double b, double c, double w,
                                        double v, double m0, double cov0,
                                        double lambda_s, double lambda_c,
                                        int horizon, double weight_x,
                                        double weight_a) {
  isac::ScenarioConfig cfg;
  cfg.A = mat1(a);
  cfg.B = mat1(b);
  cfg.C = mat1(c);
  cfg.W = mat1(w);
  cfg.V = mat1(v);
  cfg.m0 = vec1(m0);
  cfg.M0 = mat1(cov0);
  cfg.lambda_s = lambda_s;
  cfg.lambda_c = lambda_c;
  cfg.horizon = horizon;
  cfg.omega_x.assign(static_cast<std::size_t>(horizon) + 2, mat1(weight_x));
  cfg.omega_a.assign(static_cast<std::size_t>(horizon) + 1, mat1(weight_a));
  return cfg;
}

inline bool bitwise_equal(const isac::Matrix& a, const isac::Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 || (a.array() == b.array()).all());
}

// Unique scratch directory; removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("isac_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
  }

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  std::string str() const { return path_.string(); }
  std::filesystem::path path() const { return path_; }
  std::string sub(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string write_temp_scenario(const TempDir& dir,
                                       const std::string& name,
                                       const std::string& text) {
  std::filesystem::create_directories(dir.path());
  const std::string path = dir.sub(name);
  isac::write_text_file(path, text);
  return path;
}

}  // namespace testutil
