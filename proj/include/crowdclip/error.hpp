#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crowdclip {

enum class ErrorCode {
  kImageTooSmall,
  kInvalidRatio,
  kOutOfBounds,
  kDegeneratePyramid,
  kTargetMissing,
  kEmptyPromptSet,
  kEncoderFailure,
  kShapeMismatch,
  kDimMismatch,
  kNotSquare,
  kKinkTooClose,
  kEmptyStream,
  kParseError,
  kBoundsError,
  kLengthMismatch,
  kEmpty,
  kConfigError,
  kIoError,
  kInvalidArgument,
};

std::string_view ToString(ErrorCode code);

// Every library failure is reported as an Error carrying a stable code, so
// callers (tests, the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ToString(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace crowdclip
