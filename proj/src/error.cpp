#include "podcount/error.hpp"

namespace podcount {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateFrame: return "DuplicateFrame";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnscoredPrediction: return "UnscoredPrediction";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::EmptyClassMap: return "EmptyClassMap";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::NonMonotonicFrame: return "NonMonotonicFrame";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::MissingSide: return "MissingSide";
    case ErrorCode::InconsistentGroundTruth: return "InconsistentGroundTruth";
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::UnscoredDetection: return "UnscoredDetection";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::WrongViewCount: return "WrongViewCount";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DegenerateCutoff: return "DegenerateCutoff";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteActivation:
    case ErrorCode::DivergedTraining:
    case ErrorCode::ZeroVariance:
    case ErrorCode::UndefinedMetric:
      return 3;
    default:
      return 2;
  }
}

}  // namespace podcount
