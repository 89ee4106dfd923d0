#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sasinr {

/// Invalid configuration or violated precondition on user-facing inputs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File missing, unreadable, or malformed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric computation produced something unusable (NaN/Inf, a PSF whose
/// peak is off-center, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training loss became NaN or Inf.
class NonFiniteLossError : public NumericError {
 public:
  NonFiniteLossError(std::size_t iteration, double loss)
      : NumericError("non-finite loss " + std::to_string(loss) + " at iteration " +
                     std::to_string(iteration)),
        iteration_(iteration),
        loss_(loss) {}

  std::size_t iteration() const noexcept { return iteration_; }
  double loss() const noexcept { return loss_; }

 private:
  std::size_t iteration_;
  double loss_;
};

}  // namespace sasinr
