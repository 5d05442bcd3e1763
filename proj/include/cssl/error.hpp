#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cssl {

enum class ErrorCode {
  CycleDetected,
  MultipleLabels,
  UnknownNode,
  DuplicateNode,
  InvalidEdge,
  InvalidDims,
  ShapeMismatch,
  NonFiniteLoss,
  NonPositiveBandwidth,
  DimMismatch,
  TooFewPoints,
  EmptySample,
  SingleClassSample,
  TooFewSamples,
  EmptyLabelled,
  MissingBEPair,
  SignatureMismatch,
  BalanceRejectionExhausted,
  ParseError,
  MissingColumn,
  ConstantColumn,
  InsufficientRows,
  ClassCoverageFailure,
  MissingModel,
  JointModeUnavailable,
  EmptyPartition,
  EmptyResults,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every throw site carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cssl
