#pragma once

#include <stdexcept>
#include <string>

namespace preforge {

enum class ErrorKind {
  InvalidDimension,
  Normalization,
  Shape,
  NumericalConvergence,
  NoUniqueSteadyState,
  AssumptionViolation,
  InvalidSetting,
  InconsistentSubspace,
  InfeasibleSubspace,
  InvalidPermutation,
  SymmetryViolation,
  SynthesisFailure,
  RealizationFailure,
  InvalidConfig,
  Parse,
  UnboundParameter,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace preforge
