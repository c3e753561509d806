#include "pmatch/error.hpp"

namespace pmatch {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::InvalidExtrinsics: return "InvalidExtrinsics";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::InvalidBBox: return "InvalidBBox";
    case ErrorCode::DegenerateHomography: return "DegenerateHomography";
    case ErrorCode::AboveHorizon: return "AboveHorizon";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::CollinearInput: return "CollinearInput";
    case ErrorCode::UnknownQuery: return "UnknownQuery";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
  }
  return "Unknown";
}

}  // namespace pmatch
