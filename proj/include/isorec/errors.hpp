#pragma once

#include <stdexcept>
#include <string>

namespace isorec {

/// Bad input from the caller or the command line (CLI exit code 1).
struct UserError : std::runtime_error {
  explicit UserError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : UserError {
  using UserError::UserError;
};

struct ParseError : UserError {
  using UserError::UserError;
};

struct ValidationError : UserError {
  using UserError::UserError;
};

struct DegenerateLatticeError : UserError {
  using UserError::UserError;
};

struct EmptyGridError : UserError {
  using UserError::UserError;
};

struct NotEstimableError : UserError {
  using UserError::UserError;
};

struct CapacityError : UserError {
  using UserError::UserError;
};

struct ConvergenceError : UserError {
  using UserError::UserError;
};

/// A mathematical invariant of the method failed; this is a bug, not a
/// user error (CLI exit code 2).
struct InvariantError : std::logic_error {
  explicit InvariantError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace isorec
