#pragma once

#include <stdexcept>
#include <string>

namespace dwos {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query point lies outside the domain.
class ExteriorPoint : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a kernel function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Too many walks hit the step cap.
class MaxStepsExceeded : public Error {
 public:
  using Error::Error;
};

class NonpositiveAlpha : public Error {
 public:
  using Error::Error;
};

/// The adjoint replay did not reproduce the primal walk.
class ReplayDivergence : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid problem or experiment description.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dwos
