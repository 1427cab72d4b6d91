#include "tripose/errors.hpp"

namespace tripose {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::SingularIntrinsics: return "SingularIntrinsics";
    case ErrorCode::CheiralityAmbiguous: return "CheiralityAmbiguous";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::ZeroExtent: return "ZeroExtent";
    case ErrorCode::DegenerateShape: return "DegenerateShape";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SequenceTooShort: return "SequenceTooShort";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace tripose
