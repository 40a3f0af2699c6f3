#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace adcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between a value and the structure it is fed to.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Rejected configuration (unknown key, bad value, violated gain condition).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical fault during a step (non-finite values, loss of definiteness).
class NumericalFault : public Error {
 public:
  NumericalFault(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_dim(Eigen::Index got, Eigen::Index want, const std::string& what) {
  if (got != want) {
    throw DimensionError(what + ": expected " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

}  // namespace adcbf
