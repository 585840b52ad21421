#include "podcount/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "podcount/error.hpp"

namespace podcount {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y,
                std::size_t min_len) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "lengths " + std::to_string(x.size()) + " and " +
                    std::to_string(y.size()) + " differ");
  }
  if (x.size() < min_len) {
    throw Error(ErrorCode::LengthMismatch,
                "need at least " + std::to_string(min_len) + " values");
  }
}

// Indices of the k largest values; ties go to the lower index.
std::vector<bool> top_k(std::span<const double> v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  std::vector<bool> chosen(v.size(), false);
  for (std::size_t i = 0; i < k; ++i) chosen[idx[i]] = true;
  return chosen;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::ZeroVariance, "correlation needs variation in both inputs");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double rank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

std::size_t selection_size(double p, std::size_t n) {
  return static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
}

ConfusionCounts top_fraction_selection(std::span<const double> ground_truth,
                                       std::span<const double> predicted,
                                       double p) {
  check_pair(ground_truth, predicted, 1);
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::DegenerateCutoff, "cutoff must lie in (0, 1)");
  }
  const std::size_t k = selection_size(p, ground_truth.size());
  if (k == 0) {
    throw Error(ErrorCode::DegenerateCutoff,
                "cutoff selects no plots out of " + std::to_string(ground_truth.size()));
  }
  const auto actual = top_k(ground_truth, k);
  const auto chosen = top_k(predicted, k);
  ConfusionCounts c;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] && chosen[i]) ++c.tp;
    else if (!actual[i] && !chosen[i]) ++c.tn;
    else if (chosen[i]) ++c.fp;
    else ++c.fn;
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
    throw Error(ErrorCode::UndefinedMetric,
                "sensitivity and specificity need both classes present");
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return m;
}

RankingReport ranking_report(std::span<const double> ground_truth,
                             std::span<const double> predicted,
                             std::span<const double> cutoffs) {
  check_pair(ground_truth, predicted, 1);
  RankingReport r;
  r.n = ground_truth.size();
  try {
    r.pearson_r = pearson(ground_truth, predicted);
    r.spearman_rho = spearman(ground_truth, predicted);
  } catch (const Error& e) {
    r.correlation_error = e.what();
  }
  for (double p : cutoffs) {
    CutoffResult cr;
    cr.fraction = p;
    cr.counts = top_fraction_selection(ground_truth, predicted, p);
    cr.metrics = classification_metrics(cr.counts);
    r.cutoffs.push_back(cr);
  }
  return r;
}

double round_decimals(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The nudge resolves ties that binary floating point lands just below.
  const double scaled = value * scale;
  return std::round(scaled + std::copysign(1e-9 * std::max(1.0, std::abs(scaled)), scaled)) /
         scale;
}

std::string format_ranking_table(std::span<const ModelColumn> columns, int decimals) {
  std::ostringstream out;
  out << "metric";
  for (const auto& col : columns) {
    for (const auto& c : col.cutoffs) {
      out << ',' << col.model << " top " << round_decimals(c.fraction * 100.0, 6) << '%';
    }
  }
  out << '\n';
  auto count_row = [&](const char* name, auto get) {
    out << name;
    for (const auto& col : columns) {
      for (const auto& c : col.cutoffs) out << ',' << get(c.counts);
    }
    out << '\n';
  };
  count_row("TP", [](const ConfusionCounts& c) { return c.tp; });
  count_row("TN", [](const ConfusionCounts& c) { return c.tn; });
  count_row("FP", [](const ConfusionCounts& c) { return c.fp; });
  count_row("FN", [](const ConfusionCounts& c) { return c.fn; });
  auto metric_row = [&](const char* name, auto get) {
    out << name;
    for (const auto& col : columns) {
      for (const auto& c : col.cutoffs) {
        out << ',' << std::fixed << std::setprecision(decimals)
            << round_decimals(get(c.metrics), decimals);
        out.unsetf(std::ios::floatfield);
      }
    }
    out << '\n';
  };
  metric_row("Accuracy", [](const ClassificationMetrics& m) { return m.accuracy; });
  metric_row("Sensitivity", [](const ClassificationMetrics& m) { return m.sensitivity; });
  metric_row("Specificity", [](const ClassificationMetrics& m) { return m.specificity; });
  return out.str();
}

std::string scatter_svg(std::span<const double> ground_truth,
                        std::span<const double> predicted, const std::string& title) {
  check_pair(ground_truth, predicted, 1);
  constexpr double kW = 480, kH = 480, kMargin = 60;
  double lo = std::min(*std::min_element(ground_truth.begin(), ground_truth.end()),
                       *std::min_element(predicted.begin(), predicted.end()));
  double hi = std::max(*std::max_element(ground_truth.begin(), ground_truth.end()),
                       *std::max_element(predicted.begin(), predicted.end()));
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto sx = [&](double v) { return kMargin + (v - lo) / (hi - lo) * (kW - 2 * kMargin); };
  auto sy = [&](double v) { return kH - kMargin - (v - lo) / (hi - lo) * (kH - 2 * kMargin); };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  // Axes.
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\"" << kW - kMargin
      << "\" y2=\"" << kH - kMargin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kH - kMargin << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg << "<text x=\"" << sx(v) << "\" y=\"" << kH - kMargin + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << std::setprecision(0) << v
        << "</text>\n";
    svg << "<text x=\"" << kMargin - 6 << "\" y=\"" << sy(v) + 3
        << "\" text-anchor=\"end\" font-size=\"10\">" << v << "</text>\n"
        << std::setprecision(2);
  }
  svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 16
      << "\" text-anchor=\"middle\" font-size=\"12\">ground truth pod count</text>\n";
  svg << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << kH / 2 << ")\">predicted pod count</text>\n";
  // Identity line.
  svg << "<line x1=\"" << sx(lo) << "\" y1=\"" << sy(lo) << "\" x2=\"" << sx(hi)
      << "\" y2=\"" << sy(hi) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  // Least-squares fit of prediction on ground truth.
  const double n = static_cast<double>(ground_truth.size());
  const double mx = std::accumulate(ground_truth.begin(), ground_truth.end(), 0.0) / n;
  const double my = std::accumulate(predicted.begin(), predicted.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    sxy += (ground_truth[i] - mx) * (predicted[i] - my);
    sxx += (ground_truth[i] - mx) * (ground_truth[i] - mx);
  }
  if (sxx > 0.0) {
    const double slope = sxy / sxx;
    const double icept = my - slope * mx;
    svg << "<line x1=\"" << sx(lo) << "\" y1=\"" << sy(icept + slope * lo) << "\" x2=\""
        << sx(hi) << "\" y2=\"" << sy(icept + slope * hi)
        << "\" stroke=\"firebrick\"/>\n";
  }
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    svg << "<circle cx=\"" << sx(ground_truth[i]) << "\" cy=\"" << sy(predicted[i])
        << "\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace podcount
