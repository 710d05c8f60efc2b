#pragma once

#include <stdexcept>
#include <string>

namespace socsim {

/// Base class for every error raised by the simulator library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// No tiling of an operator fits the accelerator's scratchpads.
class InfeasibleTilingError : public Error {
 public:
  using Error::Error;
};

/// A job's operands do not fit the scratchpads, or the job is empty.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Simulated time exceeded the representable range.
class TimeOverflowError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  enum class Kind { MalformedHeader, TruncatedPayload, UnknownOperator, VersionMismatch };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace socsim
