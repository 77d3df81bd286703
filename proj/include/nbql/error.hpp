#pragma once

#include <stdexcept>
#include <string>

namespace nbql {

// Machine-readable error category, reported by the CLI as the "error" field.
enum class ErrorKind {
  InvalidArgument,
  InvalidPoint,
  EmptyPool,
  InsufficientData,
  Protocol,
  Config,
  DegenerateMetric,
  Env,
  Policy,
  DegenerateCurve,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Offending config field, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

}  // namespace nbql
