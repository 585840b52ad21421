#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "podcount/data_model.hpp"

namespace podcount {

struct ScoredFlag {
  double score{0.0};
  bool is_tp{false};

  friend bool operator==(const ScoredFlag&, const ScoredFlag&) = default;
};

/// Predictions sorted by descending score (ties keep input order), each marked
/// true or false positive, plus the number of ground-truth boxes they competed
/// for.
struct MatchOutcome {
  std::vector<ScoredFlag> flags;
  std::size_t n_ground_truth{0};
};

struct PrPoint {
  double recall{0.0};
  double precision{0.0};
};

struct PrCurve {
  std::vector<PrPoint> points;
};

enum class Interpolation { AllPoint, ElevenPoint };

/// Greedy matching in descending score order. Each prediction takes the
/// unmatched ground-truth box with the highest IoU (lowest index on ties) and
/// is a true positive when that IoU reaches `threshold`.
/// Throws UnscoredPrediction if any prediction lacks a score and
/// InvalidThreshold unless threshold lies in (0, 1].
MatchOutcome match_at_iou(std::span<const Detection> predictions,
                          std::span<const Detection> ground_truth,
                          double threshold);

/// Concatenates per-image outcomes and re-sorts by score. Equal scores keep
/// the order in which the parts are given.
MatchOutcome merge_outcomes(std::span<const MatchOutcome> parts);

PrCurve pr_curve(const MatchOutcome& outcome);

/// Area under the interpolated precision-recall curve, where the precision at
/// a recall level is the best precision at that recall or any higher one.
/// Throws NoGroundTruth when outcome.n_ground_truth == 0.
double average_precision(const MatchOutcome& outcome,
                         Interpolation interp = Interpolation::AllPoint);

/// Unweighted mean over classes. Throws EmptyClassMap on an empty map.
double mean_ap(const std::map<std::string, double>& per_class_ap);

struct ClassEvaluation {
  std::string label;
  std::size_t n_ground_truth{0};
  std::size_t n_predictions{0};
  double ap{0.0};
};

struct EvaluationReport {
  double threshold{0.55};
  Interpolation interpolation{Interpolation::AllPoint};
  std::vector<ClassEvaluation> classes;
  double map{0.0};
};

/// Evaluates frame-aligned prediction and ground-truth streams. Classes are
/// the labels present in the ground truth; predictions for other labels are
/// ignored. Frames missing from either stream count as empty.
EvaluationReport evaluate_frames(std::span<const FrameRecord> predictions,
                                 std::span<const FrameRecord> ground_truth,
                                 double threshold,
                                 Interpolation interp = Interpolation::AllPoint);

/// Columns threshold,class,n_gt,n_pred,AP followed by a final mAP row.
std::string format_evaluation_report(const EvaluationReport& report);

}  // namespace podcount
