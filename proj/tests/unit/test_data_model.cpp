#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "podcount/data_model.hpp"
#include "podcount/error.hpp"

using namespace podcount;

namespace {

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoFailure;
}

std::string via_doc(const std::string& regions) {
  return R"({"img1.jpg123": {"filename": "img1.jpg", "size": 1, "regions": [)" + regions +
         "]}}";
}

std::string rect(double x, double y, double w, double h) {
  std::ostringstream s;
  s << R"({"shape_attributes": {"name": "rect", "x": )" << x << R"(, "y": )" << y
    << R"(, "width": )" << w << R"(, "height": )" << h
    << R"(}, "region_attributes": {"label": "Pod"}})";
  return s.str();
}

}  // namespace

TEST_CASE("annotations without regions") {
  CHECK(parse_annotations("{}").images.empty());
  const auto set = parse_annotations(via_doc(""));
  REQUIRE(set.images.size() == 1);
  CHECK(set.images.at("img1.jpg").empty());
}

TEST_CASE("one rectangle region") {
  const auto set = parse_annotations(via_doc(rect(10, 20, 30, 40)));
  const auto& dets = set.images.at("img1.jpg");
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].box == BoundingBox(10, 20, 30, 40));
  CHECK_FALSE(dets[0].score.has_value());
  CHECK(dets[0].label == "Pod");
}

TEST_CASE("zero-width region names the region") {
  const std::string doc = via_doc(rect(1, 1, 5, 5) + "," + rect(10, 20, 0, 40));
  try {
    parse_annotations(doc);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingField);
    CHECK(std::string(e.what()).find("region 1") != std::string::npos);
  }
}

TEST_CASE("non-rect regions are skipped and counted") {
  const std::string poly =
      R"({"shape_attributes": {"name": "polygon", "all_points_x": [1,2,3], "all_points_y": [1,2,1]}, "region_attributes": {}})";
  const auto set = parse_annotations(via_doc(poly + "," + rect(0, 0, 2, 2)));
  CHECK(set.skipped_regions == 1);
  CHECK(set.images.at("img1.jpg").size() == 1);
}

TEST_CASE("malformed annotation text") {
  CHECK(error_of([] { parse_annotations("{not json"); }) == ErrorCode::MalformedDocument);
}

TEST_CASE("detection streams") {
  CHECK(parse_detections(std::string_view("")).empty());

  const auto frames = parse_detections(std::string_view(
      "{\"frame_id\": 5, \"detections\": []}\n"
      "# comment\n\n"
      "{\"frame_id\": 3, \"detections\": [{\"x\":1,\"y\":2,\"w\":3,\"h\":4,\"score\":0.5,\"label\":\"Pod\"}]}\n"));
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].frame_id == 3);
  CHECK(frames[1].frame_id == 5);
  CHECK(frames[0].detections[0].box == BoundingBox(1, 2, 3, 4));
  CHECK(*frames[0].detections[0].score == 0.5);

  try {
    parse_detections(std::string_view("{\"frame_id\": 7, \"detections\": []}\n"
                                      "{\"frame_id\": 7, \"detections\": []}\n"));
    FAIL("expected DuplicateFrame");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateFrame);
    CHECK(std::string(e.what()).find('7') != std::string::npos);
  }

  CHECK(error_of([] { parse_detections(std::string_view("{\"frame_id\": 1\n")); }) ==
        ErrorCode::MalformedLine);
}

TEST_CASE("scores outside [0, 1] are rejected") {
  CHECK_THROWS_AS(parse_detections(std::string_view(
                      "{\"frame_id\": 1, \"detections\": [{\"x\":1,\"y\":2,\"w\":3,\"h\":4,\"score\":1.5}]}")),
                  Error);
}

TEST_CASE("detection stream round-trip on random frames") {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<FrameRecord> frames;
    for (std::int64_t f = 0; f < 10; ++f) {
      FrameRecord fr{f * 3 + rep, {}};
      const auto n = rng.below(6);
      for (std::uint64_t i = 0; i < n; ++i) {
        Detection d{oracle::random_box(rng), std::nullopt,
                    rng.bernoulli(0.5) ? std::string(kPodLabel) : std::string(kPlotLabel)};
        if (rng.bernoulli(0.7)) d.score = rng.uniform();
        fr.detections.push_back(d);
      }
      frames.push_back(fr);
    }
    const std::string text = serialize_detections(frames);
    const auto back = parse_detections(text);
    CHECK(back == frames);
    CHECK(serialize_detections(back) == text);
  }
}

TEST_CASE("annotation round-trip") {
  Rng rng(22);
  AnnotationSet set;
  for (int i = 0; i < 5; ++i) {
    auto& dets = set.images["plot" + std::to_string(i) + ".jpg"];
    for (int k = 0; k < i; ++k) dets.push_back({oracle::random_box(rng), std::nullopt, "Pod"});
  }
  const std::string text = serialize_annotations(set);
  const auto back = parse_annotations(text);
  CHECK(back.images == set.images);
  CHECK(serialize_annotations(back) == text);
}

TEST_CASE("plot metadata round-trip and validation") {
  std::vector<PlotMeta> plots = {{"P001", Side::A, 0, 29, 512},
                                 {"P001", Side::B, 0, 29, 512},
                                 {"P002", Side::A, 30, 59, 300}};
  std::ostringstream out;
  write_plot_meta(out, plots);
  std::istringstream in(out.str());
  CHECK(parse_plot_meta(in) == plots);

  std::istringstream bad("plot_id,side,frame_start,frame_end,ground_truth_pods\nP1,A,9,3,10\n");
  CHECK_THROWS_AS(parse_plot_meta(bad), Error);
}

TEST_CASE("dataset statistics") {
  const std::vector<std::int64_t> constant{5, 5, 5};
  const auto s = dataset_stats(constant);
  CHECK(s.n == 3);
  CHECK(s.min == 5);
  CHECK(s.max == 5);
  CHECK(s.mean == 5);
  CHECK(s.std_sample == 0);
  CHECK(s.std_population == 0);

  const std::vector<std::int64_t> abc{1, 2, 3};
  const auto t = dataset_stats(abc);
  CHECK(t.mean == 2.0);
  CHECK(t.std_sample == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.std_population == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));

  CHECK(error_of([] { dataset_stats(std::vector<std::int64_t>{}); }) == ErrorCode::EmptyDataset);
}

TEST_CASE("dataset statistics properties") {
  Rng rng(23);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::int64_t> v(2 + rng.below(40));
    for (auto& x : v) x = static_cast<std::int64_t>(rng.below(1000));
    const auto a = dataset_stats(v);
    rng.shuffle(std::span(v));
    const auto b = dataset_stats(v);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-12));
    CHECK(a.std_sample == doctest::Approx(b.std_sample).epsilon(1e-12));
    CHECK(a.min == b.min);
    CHECK(a.max == b.max);
    CHECK(a.std_population <= a.std_sample);
    CHECK(a.min <= a.mean);
    CHECK(a.mean <= a.max);
  }
}

TEST_CASE("count lists and metadata tables") {
  std::istringstream plain("# counts\n1, 2\n3\n");
  CHECK(parse_counts(plain) == std::vector<std::int64_t>{1, 2, 3});

  std::istringstream meta(
      "plot_id,side,frame_start,frame_end,ground_truth_pods\n"
      "P1,A,0,5,10\nP1,B,0,5,10\nP2,A,6,9,20\n");
  CHECK(parse_counts(meta) == std::vector<std::int64_t>{10, 20});
}

TEST_CASE("side names") {
  for (Side s : {Side::A, Side::B, Side::FRONT, Side::LEFT, Side::RIGHT}) {
    CHECK(parse_side(to_string(s)) == s);
  }
  CHECK(error_of([] { parse_side("Z"); }) == ErrorCode::MalformedDocument);
}
