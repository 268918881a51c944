#pragma once

#include <stdexcept>
#include <string>

namespace rcn {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgumentError : Error {
  using Error::Error;
};

// The TPS system matrix is (numerically) singular.
struct SingularSystemError : Error {
  using Error::Error;
};

// Newton inversion failed to reach tolerance.
struct NoConvergenceError : Error {
  using Error::Error;
};

// A fiducial set violated its invariants during calibration.
struct DegenerateFiducialsError : Error {
  explicit DegenerateFiducialsError(const std::string& msg, int step_index = -1)
      : Error(msg), step(step_index) {}
  int step;  // 1-based calibration step, -1 if not applicable
};

struct NoForegroundError : Error {
  using Error::Error;
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

// Gradient descent produced a non-finite loss.
struct DivergenceError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace rcn
