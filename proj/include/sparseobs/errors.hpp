#pragma once

#include <stdexcept>
#include <string>

namespace sparseobs {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, malformed models, malformed configs. CLI maps these to exit code 1.
struct ValidationError : Error {
  using Error::Error;
};

/// Exact enumeration would exceed the configured size guard.
struct InfeasibleError : Error {
  using Error::Error;
};

/// A supplied world has zero probability under the model (inconsistent evidence).
struct ImpossibleWorldError : Error {
  using Error::Error;
};

/// A message or marginal normalizer vanished during BP (non-soft kernels plus
/// contradictory observations). Carries the offending edge.
struct ZeroNormalizerError : Error {
  ZeroNormalizerError(const std::string& what, int var, int fac)
      : Error(what), var_id(var), fac_id(fac) {}
  int var_id;
  int fac_id;
};

}  // namespace sparseobs
