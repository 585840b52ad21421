#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "podcount/error.hpp"
#include "podcount/ranking.hpp"

using namespace podcount;

namespace {

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoFailure;
}

// Top-k membership from a full sort (descending, lower index first on ties).
std::vector<bool> top_k(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  std::vector<bool> in(v.size(), false);
  for (std::size_t i = 0; i < k; ++i) in[idx[i]] = true;
  return in;
}

}  // namespace

TEST_CASE("pearson") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  // cov 1.5, sd_x 1, sd_y sqrt(7/3)
  const std::vector<double> a = {1, 2, 3}, b = {1, 2, 4};
  CHECK(pearson(a, b) == doctest::Approx(1.5 / std::sqrt(7.0 / 3.0)).epsilon(1e-12));
  const std::vector<double> c = {2, 2, 2};
  CHECK(error_of([&] { pearson(a, c); }) == ErrorCode::ZeroVariance);
  CHECK(error_of([&] { pearson(a, x); }) == ErrorCode::LengthMismatch);
  const std::vector<double> one = {1};
  CHECK(error_of([&] { pearson(one, one); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("spearman") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> cubes = {1, 8, 27, 64, 125};
  const std::vector<double> rev = {5, 4, 3, 2, 1};
  CHECK(spearman(x, cubes) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(x, rev) == doctest::Approx(-1.0).epsilon(1e-12));
  // ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
  const std::vector<double> t = {1, 2, 2, 3}, y = {10, 20, 30, 40};
  CHECK(average_ranks(t) == std::vector<double>{1, 2.5, 2.5, 4});
  CHECK(spearman(t, y) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)).epsilon(1e-12));
}

TEST_CASE("selection size") {
  CHECK(selection_size(0.2, 44) == 8);
  CHECK(selection_size(0.3, 44) == 13);
  CHECK(selection_size(0.29, 100) == 29);
  CHECK(selection_size(0.3, 10) == 3);
}

TEST_CASE("top-fraction selection") {
  std::vector<double> gt(10), pred(10);
  for (int i = 0; i < 10; ++i) {
    gt[static_cast<std::size_t>(i)] = 10.0 - i;
    pred[static_cast<std::size_t>(i)] = 1.0 + i;
  }
  CHECK(top_fraction_selection(gt, pred, 0.3) == ConfusionCounts{0, 4, 3, 3});
  const auto perfect = top_fraction_selection(gt, gt, 0.3);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);
  CHECK(classification_metrics(perfect).sensitivity == 1.0);

  Rng rng(101);
  std::vector<double> g(44), p(44);
  for (auto& v : g) v = rng.uniform(100, 1000);
  for (auto& v : p) v = rng.uniform(100, 1000);
  const auto c20 = top_fraction_selection(g, p, 0.2);
  CHECK(c20.tp + c20.fn == 8);
  CHECK(c20.tp + c20.fp == 8);
  const auto c30 = top_fraction_selection(g, p, 0.3);
  CHECK(c30.tp + c30.fn == 13);

  CHECK(error_of([&] { top_fraction_selection(g, p, 0.0); }) == ErrorCode::DegenerateCutoff);
  CHECK(error_of([&] { top_fraction_selection(g, p, 1.0); }) == ErrorCode::DegenerateCutoff);
  CHECK(error_of([&] { top_fraction_selection(std::vector<double>(3, 1.0),
                                              std::vector<double>(3, 1.0), 0.2); }) ==
        ErrorCode::DegenerateCutoff);
  CHECK(error_of([&] { top_fraction_selection(g, std::vector<double>(3), 0.2); }) ==
        ErrorCode::LengthMismatch);
}

TEST_CASE("classification metrics against the study's table") {
  for (const auto& col : oracle::table3()) {
    const auto m = classification_metrics({col.tp, col.tn, col.fp, col.fn});
    INFO(col.model << " " << col.cutoff);
    CHECK(round_decimals(m.accuracy, 2) == col.accuracy);
    CHECK(round_decimals(m.sensitivity, 2) == col.sensitivity);
    CHECK(round_decimals(m.specificity, 2) == col.specificity);
  }
  const auto m = classification_metrics({3, 31, 5, 5});
  CHECK(m.accuracy == doctest::Approx(34.0 / 44.0).epsilon(1e-12));
  CHECK(m.sensitivity == doctest::Approx(3.0 / 8.0).epsilon(1e-12));
  CHECK(m.specificity == doctest::Approx(31.0 / 36.0).epsilon(1e-12));
  CHECK(error_of([] { classification_metrics({0, 5, 5, 0}); }) == ErrorCode::UndefinedMetric);
  CHECK(error_of([] { classification_metrics({5, 0, 0, 5}); }) == ErrorCode::UndefinedMetric);
}

TEST_CASE("rounding") {
  CHECK(round_decimals(37.0 / 40.0, 2) == 0.93);
  CHECK(round_decimals(0.125, 2) == 0.13);
  CHECK(round_decimals(-0.125, 2) == -0.13);
  CHECK(round_decimals(0.7727, 2) == 0.77);
}

TEST_CASE("ranking report") {
  std::vector<double> gt = {5, 1, 9, 3, 7, 2, 8, 4, 6, 10};
  const std::vector<double> cutoffs = {0.2, 0.3};
  const auto same = ranking_report(gt, gt, cutoffs);
  CHECK(*same.pearson_r == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(same.cutoffs.size() == 2);
  for (const auto& c : same.cutoffs) CHECK(c.metrics.sensitivity == 1.0);

  const std::vector<double> flat(10, 3.0);
  const auto constant = ranking_report(gt, flat, cutoffs);
  CHECK_FALSE(constant.pearson_r.has_value());
  CHECK(constant.correlation_error.find("ZeroVariance") != std::string::npos);
  REQUIRE(constant.cutoffs.size() == 2);
  // the first k indices are selected
  CHECK(constant.cutoffs[0].counts.tp + constant.cutoffs[0].counts.fp == 2);
  CHECK(constant.n == 10);
}

TEST_CASE("selection and correlation invariances") {
  Rng rng(102);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> g(n), p(n);
    for (auto& v : g) v = std::floor(rng.uniform(100, 400));
    for (auto& v : p) v = std::floor(rng.uniform(100, 400));
    const double frac = rng.uniform(0.1, 0.9);
    const auto k = selection_size(frac, n);
    if (k == 0) continue;
    const auto c = top_fraction_selection(g, p, frac);
    CHECK(c.total() == n);
    CHECK(c.tp + c.fn == k);
    CHECK(c.tp + c.fp == k);

    // oracle: set intersection of full-sort top-k memberships
    const auto ag = top_k(g, k), ap = top_k(p, k);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) tp += (ag[i] && ap[i]) ? 1 : 0;
    CHECK(c.tp == tp);
    CHECK((c.tp == k) == (ag == ap));

    std::vector<double> mono(n), affine(n);
    for (std::size_t i = 0; i < n; ++i) {
      mono[i] = std::exp(p[i] / 100.0);
      affine[i] = 3.0 * p[i] + 17.0;
    }
    CHECK(top_fraction_selection(g, mono, frac) == c);
    CHECK(pearson(g, affine) == doctest::Approx(pearson(g, p)).epsilon(1e-9));
    CHECK(spearman(g, mono) == doctest::Approx(spearman(g, p)).epsilon(1e-12));
    const double r = pearson(g, p);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("table and scatter output") {
  std::vector<ModelColumn> cols(1);
  cols[0].model = "m";
  cols[0].cutoffs.push_back({0.2, {3, 31, 5, 5}, classification_metrics({3, 31, 5, 5})});
  const auto t = format_ranking_table(cols, 2);
  CHECK(t.find("0.77") != std::string::npos);
  CHECK(t.find("0.38") != std::string::npos);
  CHECK(t.find("0.86") != std::string::npos);
  const std::vector<double> g = {1, 2, 3}, p = {1.5, 2, 2.5};
  const auto svg = scatter_svg(g, p, "t");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
}
