#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cosdd {

enum class ErrorCode {
  UnreadableFile,
  MixedShapes,
  NonFiniteValues,
  DegenerateStack,
  CropTooLarge,
  TooFewImages,
  OutOfRangeSignal,
  NegativeSignalForPoisson,
  ShapeNotDivisible,
  NonFiniteStats,
  ShapeMismatch,
  IndexOutOfRange,
  NonFiniteLoss,
  ImageTooSmall,
  NonPositiveRange,
  UnknownKey,
  InvalidValue,
  VersionMismatch,
  CorruptFile,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so
// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace cosdd
