#pragma once

#include <stdexcept>
#include <string>

namespace fusewake {

// Data/validation failures. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed arguments that violate an operation's preconditions.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A physiological window rejected by the artifact rule. Distinct from other
// data errors so callers can skip the window instead of failing the run.
class ArtifactRejected : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace fusewake
