#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace copydet {

/// Malformed input text (claims-CSV and friends). Carries the 1-based line.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
    {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Two claims for the same (source, item).
class ConflictError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Parameter out of range.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Caller broke a precondition (wrong provider count, mismatched carry, ...).
class ContractViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace copydet
