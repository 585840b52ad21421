#include "podcount/det_eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "podcount/error.hpp"

namespace podcount {

namespace {

void sort_by_score(std::vector<ScoredFlag>& flags) {
  std::stable_sort(flags.begin(), flags.end(),
                   [](const ScoredFlag& a, const ScoredFlag& b) {
                     return a.score > b.score;
                   });
}

}  // namespace

MatchOutcome match_at_iou(std::span<const Detection> predictions,
                          std::span<const Detection> ground_truth,
                          double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidThreshold, "IoU threshold must lie in (0, 1]");
  }
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i : order) {
    if (!predictions[i].score) {
      throw Error(ErrorCode::UnscoredPrediction,
                  "prediction " + std::to_string(i) +
                      " has no score (ground truth passed as predictions?)");
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *predictions[a].score > *predictions[b].score;
  });

  MatchOutcome out;
  out.n_ground_truth = ground_truth.size();
  out.flags.reserve(predictions.size());
  std::vector<bool> matched(ground_truth.size(), false);
  for (std::size_t i : order) {
    const Detection& p = predictions[i];
    double best = -1.0;
    std::size_t best_j = ground_truth.size();
    for (std::size_t j = 0; j < ground_truth.size(); ++j) {
      if (matched[j]) continue;
      const double o = iou(p.box, ground_truth[j].box);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    const bool tp = best_j < ground_truth.size() && best >= threshold;
    if (tp) matched[best_j] = true;
    out.flags.push_back({*p.score, tp});
  }
  return out;
}

MatchOutcome merge_outcomes(std::span<const MatchOutcome> parts) {
  MatchOutcome out;
  for (const auto& part : parts) {
    out.n_ground_truth += part.n_ground_truth;
    out.flags.insert(out.flags.end(), part.flags.begin(), part.flags.end());
  }
  sort_by_score(out.flags);
  return out;
}

PrCurve pr_curve(const MatchOutcome& outcome) {
  PrCurve curve;
  curve.points.reserve(outcome.flags.size());
  std::size_t tp = 0;
  std::size_t seen = 0;
  const double n_gt = static_cast<double>(outcome.n_ground_truth);
  for (const auto& f : outcome.flags) {
    ++seen;
    if (f.is_tp) ++tp;
    const double recall = n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(seen);
    curve.points.push_back({recall, precision});
  }
  return curve;
}

double average_precision(const MatchOutcome& outcome, Interpolation interp) {
  if (outcome.n_ground_truth == 0) {
    throw Error(ErrorCode::NoGroundTruth, "AP is undefined without ground truth");
  }
  const PrCurve curve = pr_curve(outcome);
  const auto& pts = curve.points;
  if (pts.empty()) return 0.0;

  // Precision envelope: best precision at this recall or any higher one.
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }

  double ap = 0.0;
  if (interp == Interpolation::AllPoint) {
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ap += (pts[i].recall - prev_recall) * envelope[i];
      prev_recall = pts[i].recall;
    }
  } else {
    for (int step = 0; step <= 10; ++step) {
      const double level = step / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].recall >= level) {
          best = envelope[i];
          break;
        }
      }
      ap += best;
    }
    ap /= 11.0;
  }
  return std::clamp(ap, 0.0, 1.0);
}

double mean_ap(const std::map<std::string, double>& per_class_ap) {
  if (per_class_ap.empty()) {
    throw Error(ErrorCode::EmptyClassMap, "no classes to average");
  }
  double sum = 0.0;
  for (const auto& [_, ap] : per_class_ap) sum += ap;
  return sum / static_cast<double>(per_class_ap.size());
}

EvaluationReport evaluate_frames(std::span<const FrameRecord> predictions,
                                 std::span<const FrameRecord> ground_truth,
                                 double threshold, Interpolation interp) {
  std::map<std::int64_t, const FrameRecord*> pred_by_frame;
  for (const auto& f : predictions) pred_by_frame[f.frame_id] = &f;
  std::set<std::string> labels;
  for (const auto& f : ground_truth) {
    for (const auto& d : f.detections) labels.insert(d.label);
  }

  EvaluationReport report;
  report.threshold = threshold;
  report.interpolation = interp;
  std::map<std::string, double> per_class;
  for (const auto& label : labels) {
    std::vector<MatchOutcome> parts;
    std::size_t n_pred = 0;
    std::set<std::int64_t> gt_frames;
    auto select = [&](const FrameRecord* f) {
      std::vector<Detection> out;
      if (f == nullptr) return out;
      for (const auto& d : f->detections) {
        if (d.label == label) out.push_back(d);
      }
      return out;
    };
    for (const auto& g : ground_truth) {
      gt_frames.insert(g.frame_id);
      const auto it = pred_by_frame.find(g.frame_id);
      const auto preds = select(it == pred_by_frame.end() ? nullptr : it->second);
      const auto truth = select(&g);
      n_pred += preds.size();
      parts.push_back(match_at_iou(preds, truth, threshold));
    }
    // Predictions on frames without any ground truth are all false positives.
    for (const auto& p : predictions) {
      if (gt_frames.count(p.frame_id)) continue;
      const auto preds = select(&p);
      n_pred += preds.size();
      parts.push_back(match_at_iou(preds, {}, threshold));
    }
    const MatchOutcome merged = merge_outcomes(parts);
    ClassEvaluation ce{label, merged.n_ground_truth, n_pred, 0.0};
    ce.ap = average_precision(merged, interp);
    per_class[label] = ce.ap;
    report.classes.push_back(std::move(ce));
  }
  report.map = mean_ap(per_class);
  return report;
}

std::string format_evaluation_report(const EvaluationReport& report) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "threshold,class,n_gt,n_pred,AP\n";
  for (const auto& c : report.classes) {
    out << report.threshold << ',' << c.label << ',' << c.n_ground_truth << ','
        << c.n_predictions << ',' << c.ap << '\n';
  }
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
  for (const auto& c : report.classes) {
    n_gt += c.n_ground_truth;
    n_pred += c.n_predictions;
  }
  out << report.threshold << ",mAP," << n_gt << ',' << n_pred << ','
      << report.map << '\n';
  return out.str();
}

}  // namespace podcount
