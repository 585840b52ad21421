#include <algorithm>

#include "doctest.h"
#include "oracles.hpp"
#include "podcount/error.hpp"
#include "podcount/frame_select.hpp"

using namespace podcount;

namespace {

std::vector<PlotMeta> two_sided(std::size_t n_plots, std::int64_t span = 30) {
  std::vector<PlotMeta> plots;
  for (std::size_t i = 0; i < n_plots; ++i) {
    const auto s = static_cast<std::int64_t>(i) * span;
    const std::string id = "P" + std::to_string(i);
    plots.push_back({id, Side::A, s, s + span - 1, static_cast<std::int64_t>(100 + i)});
    plots.push_back({id, Side::B, s, s + span - 1, static_cast<std::int64_t>(100 + i)});
  }
  return plots;
}

}  // namespace

TEST_CASE("evenly spaced interior frames") {
  CHECK(select_frames(10, 20, 1).frames == std::vector<std::int64_t>{15});
  CHECK(select_frames(10, 20, 3).frames == std::vector<std::int64_t>{13, 15, 18});
  const auto s = select_frames(5, 5, 3);
  CHECK(s.frames == std::vector<std::int64_t>{5, 5, 5});
  CHECK(s.short_range);
  CHECK_FALSE(select_frames(10, 20, 3).short_range);
}

TEST_CASE("range errors") {
  CHECK_THROWS_AS(select_frames(5, 4, 1), Error);
  CHECK_THROWS_AS(select_frames(0, 10, 0), Error);
}

TEST_CASE("selection properties") {
  Rng rng(51);
  for (int rep = 0; rep < 2000; ++rep) {
    const auto s = static_cast<std::int64_t>(rng.below(1000)) - 500;
    const auto e = s + static_cast<std::int64_t>(rng.below(120));
    const int n = 1 + static_cast<int>(rng.below(6));
    const auto sel = select_frames(s, e, n).frames;
    REQUIRE(sel.size() == static_cast<std::size_t>(n));
    CHECK(std::is_sorted(sel.begin(), sel.end()));
    CHECK(sel.front() >= s);
    CHECK(sel.back() <= e);
    if (n == 1) {
      const double mid = (static_cast<double>(s) + static_cast<double>(e)) / 2.0;
      CHECK(std::abs(static_cast<double>(sel[0]) - mid) <= 0.5);
    }
  }
}

TEST_CASE("view sets") {
  const auto one = two_sided(1);
  const auto vs = build_view_sets(one, 1);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].views.size() == 2);
  CHECK(vs[0].views[0].side == Side::A);
  CHECK(vs[0].views[1].side == Side::B);
  CHECK(vs[0].ground_truth_pods == 100);

  std::vector<PlotMeta> only_a = {one[0]};
  const std::vector<Side> both = {Side::A, Side::B};
  try {
    build_view_sets(only_a, 1, both);
    FAIL("expected MissingSide");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingSide);
  }

  auto inconsistent = one;
  inconsistent[1].ground_truth_pods = 7;
  try {
    build_view_sets(inconsistent, 1);
    FAIL("expected InconsistentGroundTruth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentGroundTruth);
  }
}

TEST_CASE("augmentation multiplies view sets and stays in range") {
  const auto plots = two_sided(10);
  const auto vs = build_view_sets(plots, 3, {}, {3, 4});
  CHECK(vs.size() == 30);
  for (const auto& v : vs) {
    const auto it = std::find_if(plots.begin(), plots.end(),
                                 [&](const PlotMeta& p) { return p.plot_id == v.plot_id; });
    REQUIRE(it != plots.end());
    CHECK(v.views.size() == 6);
    CHECK(v.ground_truth_pods == it->ground_truth_pods);
    for (const auto& view : v.views) {
      CHECK(view.frame >= it->frame_start);
      CHECK(view.frame <= it->frame_end);
    }
  }
  // Variants of one plot differ from the base selection.
  CHECK(vs[0].sample_index == 0);
  CHECK(vs[1].sample_index == 1);
  CHECK(vs[0].views != vs[1].views);
}

TEST_CASE("track lifetimes replace expert ranges") {
  std::vector<PlotMeta> plots = {{"P0", Side::A, 0, 29, 10}, {"P1", Side::A, 30, 59, 20}};
  std::vector<Track> tracks(3);
  tracks[0].id = 0;
  tracks[0].first_frame = 2;
  tracks[0].last_seen_frame = 27;
  tracks[1].id = 1;
  tracks[1].first_frame = 28;
  tracks[1].last_seen_frame = 40;
  tracks[2].id = 2;
  tracks[2].first_frame = 45;
  tracks[2].last_seen_frame = 58;
  const auto r = ranges_from_tracks(plots, Side::A, tracks);
  CHECK(r[0].frame_start == 2);
  CHECK(r[0].frame_end == 27);
  CHECK(r[1].frame_start == 28);
  CHECK(r[1].frame_end == 58);
}

TEST_CASE("view manifest round-trip") {
  auto vs = build_view_sets(two_sided(3), 2, {}, {2, 1});
  vs[0].views[0].roi = BoundingBox(1.5, 2, 300, 400);
  const auto text = format_view_manifest(vs);
  const auto back = parse_view_manifest(text);
  REQUIRE(back.size() == vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    CHECK(back[i].plot_id == vs[i].plot_id);
    CHECK(back[i].sample_index == vs[i].sample_index);
    CHECK(back[i].views == vs[i].views);
    CHECK(back[i].ground_truth_pods == vs[i].ground_truth_pods);
  }
  CHECK(format_view_manifest(back) == text);
}
