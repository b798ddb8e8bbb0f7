#pragma once

#include <stdexcept>
#include <string>

namespace mlkbf {

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionTooSmall : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularRsqrt : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LevelAboveSource : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TooFewParticles : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularCovariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CovarianceBlowup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AllocationTooSmall : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonPositivePoint : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mlkbf
