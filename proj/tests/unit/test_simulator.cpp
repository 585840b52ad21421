#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "podcount/data_model.hpp"
#include "podcount/det_eval.hpp"
#include "podcount/error.hpp"
#include "podcount/simulator.hpp"
#include "podcount/tracker.hpp"

using namespace podcount;

namespace {

FieldConfig small_field(std::size_t n = 4, std::uint64_t seed = 1) {
  FieldConfig c;
  c.n_plots = n;
  c.seed = seed;
  return c;
}

std::size_t count_label(const FrameRecord& f, std::string_view label) {
  std::size_t n = 0;
  for (const auto& d : f.detections) n += d.label == label ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("zero plots give an empty field") {
  const auto f = generate_field(small_field(0));
  CHECK(f.plots.empty());
  CHECK(f.plot_meta.empty());
  CHECK(f.frames_per_pass == 0);
  CHECK(render_pass(f, Side::A, {}).noisy.empty());
}

TEST_CASE("fields are deterministic in the seed") {
  const auto a = generate_field(small_field(6, 9));
  const auto b = generate_field(small_field(6, 9));
  REQUIRE(a.plots.size() == b.plots.size());
  for (std::size_t i = 0; i < a.plots.size(); ++i) {
    CHECK(a.plots[i].true_pod_count == b.plots[i].true_pod_count);
    CHECK(a.plots[i].plant_x == b.plots[i].plant_x);
    REQUIRE(a.plots[i].pods.size() == b.plots[i].pods.size());
    for (std::size_t k = 0; k < a.plots[i].pods.size(); ++k) {
      CHECK(a.plots[i].pods[k].x == b.plots[i].pods[k].x);
      CHECK(a.plots[i].pods[k].y == b.plots[i].pods[k].y);
    }
  }
  CHECK(a.plot_meta == b.plot_meta);
  const auto noise = default_field_noise();
  CHECK(render_pass(a, Side::B, noise).noisy == render_pass(b, Side::B, noise).noisy);
  const auto c = generate_field(small_field(6, 10));
  CHECK(c.plots[0].true_pod_count != a.plots[0].true_pod_count);
}

TEST_CASE("pod counts follow the configured distribution") {
  const auto f = generate_field(small_field(500, 3));
  std::vector<std::int64_t> counts;
  for (const auto& p : f.plots) {
    counts.push_back(p.true_pod_count);
    CHECK(p.true_pod_count >= 142);
    CHECK(p.true_pod_count <= 1058);
    CHECK(static_cast<std::int64_t>(p.pods.size()) == p.true_pod_count);
  }
  const auto s = dataset_stats(counts);
  CHECK(std::abs(s.mean - 599.9) <= 3.0 * 196.60 / std::sqrt(500.0));
}

TEST_CASE("metadata ranges") {
  const auto f = generate_field(small_field(7));
  CHECK(f.plot_meta.size() == 7 * 2);
  for (Side side : {Side::A, Side::B}) {
    std::int64_t prev_end = -1;
    for (const auto& m : f.plot_meta) {
      if (m.side != side) continue;
      if (prev_end >= 0) CHECK(m.frame_start == prev_end + 1);
      CHECK(m.frame_start >= 0);
      CHECK(m.frame_end - m.frame_start + 1 >= 11);
      CHECK(m.frame_end - m.frame_start + 1 <= 98);
      CHECK(m.frame_end < f.frames_per_pass);
      prev_end = m.frame_end;
    }
  }
}

TEST_CASE("configuration errors") {
  auto c = small_field();
  c.pass_speed = 2.0;  // far too many frames per plot
  CHECK_THROWS_AS(generate_field(c), Error);
  NoiseModel n;
  n.miss_rate = 1.5;
  CHECK_THROWS_AS(n.validate(), Error);
  const auto f = generate_field(small_field(2));
  try {
    render_pass(f, Side::FRONT, {});
    FAIL("expected MissingSide");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingSide);
  }
}

TEST_CASE("without noise the detector stream equals the truth") {
  const auto f = generate_field(small_field(3));
  for (Side side : {Side::A, Side::B}) {
    const auto r = render_pass(f, side, {});
    REQUIRE(r.noisy.size() == r.truth.size());
    CHECK(static_cast<std::int64_t>(r.noisy.size()) == f.frames_per_pass);
    for (std::size_t i = 0; i < r.noisy.size(); ++i) {
      REQUIRE(r.noisy[i].detections.size() == r.truth[i].detections.size());
      for (std::size_t k = 0; k < r.noisy[i].detections.size(); ++k) {
        CHECK(r.noisy[i].detections[k].box == r.truth[i].detections[k].box);
        CHECK(r.noisy[i].detections[k].label == r.truth[i].detections[k].label);
        CHECK(r.sources[i][k] == static_cast<std::int64_t>(k));
      }
    }
    std::vector<FrameRecord> scored = r.noisy;
    CHECK(evaluate_frames(scored, r.truth, 0.55).map == 1.0);
  }
}

TEST_CASE("a certain miss removes every pod but no plot") {
  const auto f = generate_field(small_field(3));
  NoiseModel n;
  n.miss_rate = 1.0;
  const auto r = render_pass(f, Side::A, n);
  std::size_t plots = 0;
  for (std::size_t i = 0; i < r.noisy.size(); ++i) {
    CHECK(count_label(r.noisy[i], kPodLabel) == 0);
    CHECK(count_label(r.noisy[i], kPlotLabel) == count_label(r.truth[i], kPlotLabel));
    plots += count_label(r.noisy[i], kPlotLabel);
  }
  CHECK(plots > 0);
}

TEST_CASE("misses thin pods binomially") {
  auto c = small_field(1, 4);
  c.pod_mean = 600;
  c.pod_std = 0;
  const auto f = generate_field(c);
  REQUIRE(f.plots[0].true_pod_count == 600);
  NoiseModel n;
  n.miss_rate = 0.2;
  std::set<std::int64_t> frames;
  const auto& m = f.plot_meta[0];
  const auto mid = (m.frame_start + m.frame_end) / 2;
  for (std::int64_t k = mid - 10; k < mid + 10; ++k) frames.insert(k);
  RenderOptions opts;
  opts.pod_frames = frames;
  const auto r = render_pass(f, Side::A, n, opts);
  double appearances = 0, detected = 0;
  for (auto k : frames) {
    const auto idx = static_cast<std::size_t>(k);
    appearances += static_cast<double>(count_label(r.truth[idx], kPodLabel));
    detected += static_cast<double>(count_label(r.noisy[idx], kPodLabel));
  }
  CHECK(appearances > 5000);
  const double sigma = std::sqrt(appearances * 0.8 * 0.2);
  CHECK(std::abs(detected - 0.8 * appearances) <= 3.0 * sigma);
}

TEST_CASE("noisy detections trace to a true pod or are spurious") {
  const auto f = generate_field(small_field(3, 5));
  const auto noise = default_field_noise();
  const auto r = render_pass(f, Side::B, noise);
  std::size_t spurious = 0;
  for (std::size_t i = 0; i < r.noisy.size(); ++i) {
    REQUIRE(r.sources[i].size() == r.noisy[i].detections.size());
    for (std::size_t k = 0; k < r.noisy[i].detections.size(); ++k) {
      const auto src = r.sources[i][k];
      const auto& d = r.noisy[i].detections[k];
      CHECK(d.score.has_value());
      CHECK(*d.score >= 0.0);
      CHECK(*d.score <= 1.0);
      if (src < 0) {
        ++spurious;
        CHECK(d.label == kPodLabel);
        continue;
      }
      const auto& t = r.truth[i].detections.at(static_cast<std::size_t>(src));
      CHECK(t.label == d.label);
      // jitter of 2 px stays well inside 20 px
      CHECK(std::abs(centroid(t.box).x - centroid(d.box).x) < 20.0);
    }
  }
  CHECK(spurious > 0);
}

TEST_CASE("frames render the same whatever subset is requested") {
  const auto f = generate_field(small_field(3, 6));
  const auto noise = default_field_noise();
  const auto full = render_pass(f, Side::A, noise);
  RenderOptions opts;
  opts.pod_frames = std::set<std::int64_t>{5, 40, 41};
  const auto part = render_pass(f, Side::A, noise, opts);
  for (auto k : *opts.pod_frames) {
    CHECK(part.noisy[static_cast<std::size_t>(k)] == full.noisy[static_cast<std::size_t>(k)]);
  }
  RenderOptions plots_only;
  plots_only.pods = false;
  const auto po = render_pass(f, Side::A, noise, plots_only);
  for (std::size_t i = 0; i < po.noisy.size(); ++i) {
    for (std::size_t k = 0; k < po.noisy[i].detections.size(); ++k) {
      CHECK(po.noisy[i].detections[k] == full.noisy[i].detections[k]);
    }
  }
}

TEST_CASE("exported truth keeps the counts") {
  const auto f = generate_field(small_field(5, 8));
  const auto ex = export_truth(f);
  std::istringstream meta(ex.plot_meta_csv);
  const auto rows = parse_plot_meta(meta);
  CHECK(rows == f.plot_meta);
  const auto ann = parse_annotations(ex.annotations_json);
  CHECK(ann.images.size() == 5);
  for (const auto& p : f.plots) {
    CHECK(ann.images.at(p.plot_id + ".jpg").size() == p.pods.size());
    for (const auto& m : rows) {
      if (m.plot_id == p.plot_id) CHECK(m.ground_truth_pods == p.true_pod_count);
    }
  }
  std::istringstream counts(ex.plot_meta_csv);
  const auto parsed = parse_counts(counts);
  REQUIRE(parsed.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(parsed[i] == f.plots[i].true_pod_count);
}

TEST_CASE("config documents round-trip") {
  auto c = small_field(9, 77);
  c.sides = {Side::A};
  c.pod_std = 12.5;
  const auto back = field_config_from_json(field_config_to_json(c));
  CHECK(field_config_to_json(back) == field_config_to_json(c));
  const auto n = default_field_noise();
  CHECK(noise_model_to_json(noise_model_from_json(noise_model_to_json(n))) ==
        noise_model_to_json(n));
}

TEST_CASE("a noiseless pass tracks into one track per plot") {
  const auto f = generate_field(small_field(6, 12));
  for (Side side : {Side::A, Side::B}) {
    const auto r = render_pass(f, side, {});
    const auto t = run_sequence(r.noisy, {}, kPlotLabel);
    REQUIRE(t.tracks.size() == f.plots.size());
    for (std::size_t i = 0; i < t.tracks.size(); ++i) {
      const auto& m = f.plot_meta[2 * i + (side == Side::B ? 1 : 0)];
      CHECK(m.plot_id == f.plots[i].plot_id);
      // the track lies around the plot's expert interval
      CHECK(t.tracks[i].first_frame <= m.frame_end);
      CHECK(t.tracks[i].last_seen_frame >= m.frame_start);
      CHECK(t.tracks[i].first_frame < m.frame_start);
      CHECK(t.tracks[i].last_seen_frame > m.frame_end);
    }
  }
}
