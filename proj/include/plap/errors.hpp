#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plap {

enum class ErrorCode {
  NonPositiveLength,
  MixedRequiresOneAxial,
  InvalidGrid,
  EllipticityViolation,
  ZeroA11,
  InvalidExponent,
  ZeroDenominator,
  EmptyInterior,
  NonpositiveV,
  CollarTooWide,
  GeometryError,
  InsufficientData,
  NonPositiveGap,
  InvalidArgument,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; the code identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace plap
