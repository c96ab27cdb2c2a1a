#include "cosdd/error.hpp"

namespace cosdd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::MixedShapes: return "MixedShapes";
    case ErrorCode::NonFiniteValues: return "NonFiniteValues";
    case ErrorCode::DegenerateStack: return "DegenerateStack";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::TooFewImages: return "TooFewImages";
    case ErrorCode::OutOfRangeSignal: return "OutOfRangeSignal";
    case ErrorCode::NegativeSignalForPoisson: return "NegativeSignalForPoisson";
    case ErrorCode::ShapeNotDivisible: return "ShapeNotDivisible";
    case ErrorCode::NonFiniteStats: return "NonFiniteStats";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::NonPositiveRange: return "NonPositiveRange";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace cosdd
