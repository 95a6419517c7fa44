#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cdinfer {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy flat.
class InferenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input files that do not follow the expected schema.
class SchemaError : public InferenceError {
public:
  using InferenceError::InferenceError;
};

// The design (or data relative to the design) breaks a structural requirement.
class DesignViolation : public InferenceError {
public:
  using InferenceError::InferenceError;
};

// q = S1/S outside (0,1).
class DegenerateDesign : public DesignViolation {
public:
  using DesignViolation::DesignViolation;
};

// Estimator preconditions. These are data-dependent, not schema problems.
class PreconditionError : public InferenceError {
public:
  using InferenceError::InferenceError;
};

class EmptyCluster : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

class NoArmData : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

class InsufficientArm : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

class InsufficientUnits : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

class InsufficientClusters : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

class DegeneratePrefactor : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

// Exhaustive enumeration refused because the realization count is too large.
class TooLarge : public InferenceError {
public:
  TooLarge(const std::string& what, double count)
      : InferenceError(what), count_(count) {}
  double count() const noexcept { return count_; }

private:
  double count_;
};

} // namespace cdinfer
