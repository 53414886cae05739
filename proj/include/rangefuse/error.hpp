#pragma once

#include <stdexcept>
#include <string>

namespace rangefuse {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data (truncated files, missing calibration keys, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid argument values: zero beams, k > M, bad strides, ...
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input violates an operation's precondition (missing beam ids, size mismatch
// between a feature grid and its declared source).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Direction undefined, e.g. azimuth of a point on the sensor's vertical axis.
class DegenerateDirectionError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

class InsufficientControlsError : public Error {
 public:
  using Error::Error;
};

// Control points (or correspondences) that cannot support a spline fit.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

}  // namespace rangefuse
