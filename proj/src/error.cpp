#include "cssl/error.hpp"

namespace cssl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::MultipleLabels: return "MultipleLabels";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::DuplicateNode: return "DuplicateNode";
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::InvalidDims: return "InvalidDims";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonPositiveBandwidth: return "NonPositiveBandwidth";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::SingleClassSample: return "SingleClassSample";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptyLabelled: return "EmptyLabelled";
    case ErrorCode::MissingBEPair: return "MissingBEPair";
    case ErrorCode::SignatureMismatch: return "SignatureMismatch";
    case ErrorCode::BalanceRejectionExhausted: return "BalanceRejectionExhausted";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::ClassCoverageFailure: return "ClassCoverageFailure";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::JointModeUnavailable: return "JointModeUnavailable";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace cssl
