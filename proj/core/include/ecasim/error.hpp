#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ecasim {

// Error categories double as CLI exit codes.
enum class ErrorCategory : int {
  kConfig = 2,
  kParse = 3,
  kValidation = 4,
  kProtocolViolation = 5,
  kUndefinedMetric = 6,
  kNotCertifiable = 7,
  kTooLarge = 8,
  kIo = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

class ProtocolViolation : public Error {
 public:
  explicit ProtocolViolation(const std::string& what)
      : Error(ErrorCategory::kProtocolViolation, what) {}
};

class UndefinedMetric : public Error {
 public:
  explicit UndefinedMetric(const std::string& what)
      : Error(ErrorCategory::kUndefinedMetric, what) {}
};

class NotCertifiable : public Error {
 public:
  explicit NotCertifiable(const std::string& what)
      : Error(ErrorCategory::kNotCertifiable, what) {}
};

class TooLarge : public Error {
 public:
  explicit TooLarge(const std::string& what) : Error(ErrorCategory::kTooLarge, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

/// Malformed scenario text. `line()` is 1-based; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(ErrorCategory::kParse,
              line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed scenario that violates a field invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(ErrorCategory::kValidation, what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace ecasim
