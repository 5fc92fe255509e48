#include "crowdclip/error.hpp"

namespace crowdclip {

std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kImageTooSmall: return "ImageTooSmall";
    case ErrorCode::kInvalidRatio: return "InvalidRatio";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kDegeneratePyramid: return "DegeneratePyramid";
    case ErrorCode::kTargetMissing: return "TargetMissing";
    case ErrorCode::kEmptyPromptSet: return "EmptyPromptSet";
    case ErrorCode::kEncoderFailure: return "EncoderFailure";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kNotSquare: return "NotSquare";
    case ErrorCode::kKinkTooClose: return "KinkTooClose";
    case ErrorCode::kEmptyStream: return "EmptyStream";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kBoundsError: return "BoundsError";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace crowdclip
