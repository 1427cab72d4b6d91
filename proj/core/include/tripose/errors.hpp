#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tripose {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  DegenerateConfiguration,
  NoConsensus,
  SingularIntrinsics,
  CheiralityAmbiguous,
  PointAtInfinity,
  NumericalFailure,
  ZeroExtent,
  DegenerateShape,
  BehindCamera,
  EmptyDataset,
  NonFiniteLoss,
  SequenceTooShort,
  Format,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure mode named in the public API maps
/// to one ErrorCode so callers (and the CLI exit-code table) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace tripose
