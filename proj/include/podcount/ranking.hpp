#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace podcount {

struct ConfusionCounts {
  std::size_t tp{0};
  std::size_t tn{0};
  std::size_t fp{0};
  std::size_t fn{0};

  [[nodiscard]] std::size_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassificationMetrics {
  double accuracy{0.0};
  double sensitivity{0.0};
  double specificity{0.0};
};

/// Throws LengthMismatch (sizes differ or fewer than 2) or ZeroVariance.
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks (ties share their mean rank).
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> values);

/// Number selected at cutoff p: floor(p * n), with a 1e-9 guard so that
/// products such as 0.29 * 100 land on the intended integer.
std::size_t selection_size(double p, std::size_t n);

/// Top-p selection agreement. The actual positives are the k = floor(p*N)
/// largest ground-truth values, the predicted positives the k largest
/// predictions; ties go to the lower index. Throws LengthMismatch or
/// DegenerateCutoff (p outside (0,1) or k == 0).
ConfusionCounts top_fraction_selection(std::span<const double> ground_truth,
                                       std::span<const double> predicted,
                                       double p);

/// accuracy = (tp+tn)/N, sensitivity = tp/(tp+fn), specificity = tn/(tn+fp).
/// Throws UndefinedMetric when either class is empty.
ClassificationMetrics classification_metrics(const ConfusionCounts& c);

struct CutoffResult {
  double fraction{0.0};
  ConfusionCounts counts;
  ClassificationMetrics metrics;
};

struct RankingReport {
  std::optional<double> pearson_r;
  std::optional<double> spearman_rho;
  /// Why a correlation is missing (for example zero variance).
  std::string correlation_error;
  std::vector<CutoffResult> cutoffs;
  std::size_t n{0};
};

/// Correlations plus per-cutoff selection metrics. A correlation that cannot
/// be computed is reported as missing; selection errors propagate.
RankingReport ranking_report(std::span<const double> ground_truth,
                             std::span<const double> predicted,
                             std::span<const double> cutoffs);

/// One labeled column group of a Table-style report.
struct ModelColumn {
  std::string model;
  std::vector<CutoffResult> cutoffs;
};

/// Rows TP, TN, FP, FN, Accuracy, Sensitivity, Specificity; one column per
/// model x cutoff. Metrics are printed with `decimals` digits.
std::string format_ranking_table(std::span<const ModelColumn> columns,
                                 int decimals = 4);

/// Round half away from zero to `decimals` digits. Values within a relative
/// 1e-9 of a tie count as the tie, so 37/40 = 0.925 rounds to 0.93.
double round_decimals(double value, int decimals);

/// Ground truth vs prediction scatter with identity and least-squares lines.
std::string scatter_svg(std::span<const double> ground_truth,
                        std::span<const double> predicted,
                        const std::string& title);

}  // namespace podcount
