#include "kle/error.hpp"

namespace kle {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SingularFunction: return "SingularFunction";
    case ErrorCode::NotDensityMatrix: return "NotDensityMatrix";
    case ErrorCode::ZeroDiagonal: return "ZeroDiagonal";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidLengthscale: return "InvalidLengthscale";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidProbs: return "InvalidProbs";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::MissingLogprobs: return "MissingLogprobs";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::InvalidResponse: return "InvalidResponse";
    case ErrorCode::CacheMiss: return "CacheMiss";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::TooFewExamples: return "TooFewExamples";
    case ErrorCode::NoCommonScenarios: return "NoCommonScenarios";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace kle
