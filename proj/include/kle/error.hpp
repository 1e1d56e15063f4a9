#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kle {

enum class ErrorCode {
  NonFinite,
  SingularFunction,
  NotDensityMatrix,
  ZeroDiagonal,
  DimensionMismatch,
  InvalidLengthscale,
  InvalidParams,
  InvalidProbs,
  EmptySequence,
  MissingLogprobs,
  InvalidInput,
  ProviderUnavailable,
  InvalidResponse,
  CacheMiss,
  NoCandidates,
  EmptyValidation,
  DegenerateLabels,
  TooFewExamples,
  NoCommonScenarios,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; code() identifies the
// failure class so callers (the CLI in particular) can map it to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kle
