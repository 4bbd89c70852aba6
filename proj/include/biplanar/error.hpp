#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biplanar {

enum class ErrorCode {
  InvalidCalibration,
  SingularProjection,
  DegenerateGeometry,
  ParseError,
  DimensionMismatch,
  InvalidRequest,
  IoError,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  ImageMismatch,
  UnreadableImage,
  UnknownSession,
  OutOfRange,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace biplanar
