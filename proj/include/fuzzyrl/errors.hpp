#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fuzzyrl {

/// Shape or layout mismatch (vector lengths, indices, dimensions).
class StructureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state or action outside the domain an environment accepts.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A rollout that produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::size_t step, std::size_t start_index = npos)
      : std::runtime_error(what), step_(step), start_index_(start_index) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t step() const noexcept { return step_; }
  /// Index of the offending start state, npos when raised by a single rollout.
  std::size_t start_index() const noexcept { return start_index_; }

 private:
  std::size_t step_;
  std::size_t start_index_;
};

/// Invalid configuration value; `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace fuzzyrl
