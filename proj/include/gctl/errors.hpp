#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gctl {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes (configuration vs. solver failures).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration-side errors

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// No Brownian component has a strictly positive lower variance bound.
class NoNondegenerateComponent : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class UnknownBuiltin : public ConfigError {
 public:
  UnknownBuiltin(const std::string& name, const std::string& suggestion)
      : ConfigError("unknown builtin '" + name + "'" +
                    (suggestion.empty() ? std::string()
                                        : "; did you mean '" + suggestion + "'?")),
        suggestion_(suggestion) {}
  const std::string& suggestion() const { return suggestion_; }

 private:
  std::string suggestion_;
};

/// Parse failures carry the byte offset into the source text.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : ConfigError(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class SyntaxError : public ParseError {
 public:
  using ParseError::ParseError;
};

class UnknownIdentifier : public ParseError {
 public:
  using ParseError::ParseError;
};

class ArityError : public ParseError {
 public:
  using ParseError::ParseError;
};

// ---------------------------------------------------------------------------
// Solver-side errors

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Expression evaluation outside a function's domain (log of a nonpositive
/// number, division by zero, ...). Offset points at the offending node.
class DomainError : public SolverError {
 public:
  DomainError(const std::string& what, std::size_t offset)
      : SolverError(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// A quadrature point left the grid by more than one cell.
class DomainEscape : public SolverError {
 public:
  using SolverError::SolverError;
};

class MonotonicityUnavailable : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Stability-driven substepping would need more than the step budget.
class CflOverflow : public SolverError {
 public:
  using SolverError::SolverError;
};

/// NaN or overflow detected during time stepping or path simulation.
class NumericalError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace gctl
