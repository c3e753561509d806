#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmatch {

enum class ErrorCode {
  InvalidIntrinsics,
  InvalidExtrinsics,
  InvalidPose,
  InvalidBBox,
  DegenerateHomography,
  AboveHorizon,
  BehindCamera,
  CollinearInput,
  UnknownQuery,
  EmptyScene,
  ZeroVector,
  BatchTooSmall,
  DimensionMismatch,
  DivergenceDetected,
  EmptyClass,
  LengthMismatch,
  ParseError,
  ConfigError,
  IoError,
  DuplicateKey,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pmatch
