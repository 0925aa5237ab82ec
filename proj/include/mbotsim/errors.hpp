#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mbotsim {

/// Non-finite input, non-positive timestep, degenerate path and similar.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Topic advertised twice.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Payload kind or layout does not match the topic contract.
class TypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stamp went backwards on a topic.
class OrderingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario document failed validation. `field()` names the offending path,
/// e.g. "robots[0].profile.wheelbase".
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Wire text could not be decoded. `offset()` is the byte position reported
/// by the parser (0 when not applicable).
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string code, const std::string& what, std::size_t offset = 0)
      : std::runtime_error(what), code_(std::move(code)), offset_(offset) {}

  const std::string& code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string code_;
  std::size_t offset_;
};

}  // namespace mbotsim
