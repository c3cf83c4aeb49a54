#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace caponef {

enum class ErrorKind {
  kNonFiniteInput,
  kInsufficientSamples,
  kDegenerateSequence,
  kOneSidedSequence,
  kDegenerateAsymmetry,
  kInsufficientRoots,
  kDegenerateFit,
  kDigitTableExhausted,
  kSyncNotFound,
  kZeroGain,
  kLengthMismatch,
  kConstantInput,
  kSingleClass,
  kNotBinary,
  kEmptyInput,
  kTooFewSamples,
  kEmptyDataset,
  kUntrainedModel,
  kNoSplits,
  kSingularFit,
  kRowOutOfRange,
  kInvalidArgument,
  kParseError,
  kIoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNonFiniteInput: return "NonFiniteInput";
    case ErrorKind::kInsufficientSamples: return "InsufficientSamples";
    case ErrorKind::kDegenerateSequence: return "DegenerateSequence";
    case ErrorKind::kOneSidedSequence: return "OneSidedSequence";
    case ErrorKind::kDegenerateAsymmetry: return "DegenerateAsymmetry";
    case ErrorKind::kInsufficientRoots: return "InsufficientRoots";
    case ErrorKind::kDegenerateFit: return "DegenerateFit";
    case ErrorKind::kDigitTableExhausted: return "DigitTableExhausted";
    case ErrorKind::kSyncNotFound: return "SyncNotFound";
    case ErrorKind::kZeroGain: return "ZeroGain";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kConstantInput: return "ConstantInput";
    case ErrorKind::kSingleClass: return "SingleClass";
    case ErrorKind::kNotBinary: return "NotBinary";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kTooFewSamples: return "TooFewSamples";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kUntrainedModel: return "UntrainedModel";
    case ErrorKind::kNoSplits: return "NoSplits";
    case ErrorKind::kSingularFit: return "SingularFit";
    case ErrorKind::kRowOutOfRange: return "RowOutOfRange";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Unknown";
}

// All library failures are reported through this exception. `context` names
// the failing item (a feature such as "P5", a file path, a row index).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string context)
      : std::runtime_error(std::string(to_string(kind)) +
                           (context.empty() ? "" : ": " + context)),
        kind_(kind),
        context_(std::move(context)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& context() const noexcept { return context_; }

 private:
  ErrorKind kind_;
  std::string context_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string context = {}) {
  throw Error(kind, std::move(context));
}

}  // namespace caponef
