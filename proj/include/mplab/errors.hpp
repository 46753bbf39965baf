#pragma once

#include <stdexcept>
#include <string>

namespace mplab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dimension or layout mismatch between operands.
struct ShapeError : Error {
  using Error::Error;
};

/// A NaN or Inf appeared where a finite value is required.
struct NumericError : Error {
  using Error::Error;
};

/// An operation was invoked in the wrong lifecycle state (e.g. backward without forward).
struct StateError : Error {
  using Error::Error;
};

struct PreconditionError : Error {
  using Error::Error;
};

struct UnderflowError : Error {
  using Error::Error;
};

struct ProtocolError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct UsageError : Error {
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace mplab
