#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mars {

/// Input outside the mathematical domain of an operation (non-finite values,
/// non-positive log-space coefficients, negative initial states).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Shape, length or index mismatch between arguments.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: singular systems, NaN states, non-converging iterations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or mutually inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mars
