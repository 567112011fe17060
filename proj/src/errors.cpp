#include "plap/errors.hpp"

namespace plap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveLength: return "NonPositiveLength";
    case ErrorCode::MixedRequiresOneAxial: return "MixedRequiresOneAxial";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::EllipticityViolation: return "EllipticityViolation";
    case ErrorCode::ZeroA11: return "ZeroA11";
    case ErrorCode::InvalidExponent: return "InvalidExponent";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::EmptyInterior: return "EmptyInterior";
    case ErrorCode::NonpositiveV: return "NonpositiveV";
    case ErrorCode::CollarTooWide: return "CollarTooWide";
    case ErrorCode::GeometryError: return "GeometryError";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonPositiveGap: return "NonPositiveGap";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace plap
