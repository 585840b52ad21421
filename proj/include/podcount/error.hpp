#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace podcount {

enum class ErrorCode {
  // geometry
  InvalidBox,
  // data-model
  MalformedDocument,
  MissingField,
  MalformedLine,
  DuplicateFrame,
  EmptyDataset,
  // det-eval
  UnscoredPrediction,
  NoGroundTruth,
  EmptyClassMap,
  InvalidThreshold,
  // tracker
  NonMonotonicFrame,
  InvalidConfig,
  // frame-select
  InvalidRange,
  MissingSide,
  InconsistentGroundTruth,
  MissingFrame,
  // featurize
  UnscoredDetection,
  MalformedHeader,
  ShapeMismatch,
  NonFiniteValue,
  // regressor
  WrongViewCount,
  NonFiniteActivation,
  StaleCache,
  EmptySampleSet,
  DivergedTraining,
  VersionMismatch,
  CorruptCheckpoint,
  // ranking
  LengthMismatch,
  ZeroVariance,
  DegenerateCutoff,
  UndefinedMetric,
  // io
  IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Process exit status for an error: 2 for data errors, 3 for numerical
/// failures. Usage errors (1) are raised by the command-line layer itself.
int exit_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace podcount
