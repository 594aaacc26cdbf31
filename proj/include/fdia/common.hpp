#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fdia {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = Eigen::VectorXi;
using MatI = Eigen::MatrixXi;

// Bus index meaning "no attack" in actions, window records, and labels.
inline constexpr int kNoAttack = -1;

// Invalid configuration files, malformed artifacts, violated loader
// invariants. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (divergent integration, non-finite loss). Exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : NumericError {
  int step;
  DivergenceError(const std::string& msg, int step_in)
      : NumericError(msg), step(step_in) {}
};

}  // namespace fdia
