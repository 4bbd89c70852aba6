#include "biplanar/error.hpp"

namespace biplanar {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidCalibration: return "InvalidCalibration";
    case ErrorCode::SingularProjection: return "SingularProjection";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::ImageMismatch: return "ImageMismatch";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::OutOfRange: return "OutOfRange";
  }
  return "Unknown";
}

}  // namespace biplanar
