#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "podcount/geometry.hpp"

namespace podcount {

inline constexpr std::string_view kPodLabel = "Pod";
inline constexpr std::string_view kPlotLabel = "Plot";

/// Detector output or annotation. Ground truth carries no score.
struct Detection {
  BoundingBox box;
  std::optional<double> score;
  std::string label{kPodLabel};

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct FrameRecord {
  std::int64_t frame_id{0};
  std::vector<Detection> detections;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

enum class Side { A, B, FRONT, LEFT, RIGHT };

std::string_view to_string(Side side) noexcept;
/// Throws Error(MalformedDocument) on an unknown name.
Side parse_side(std::string_view name);

struct PlotMeta {
  std::string plot_id;
  Side side{Side::A};
  std::int64_t frame_start{0};
  std::int64_t frame_end{0};
  std::int64_t ground_truth_pods{0};

  friend bool operator==(const PlotMeta&, const PlotMeta&) = default;
};

struct DatasetStats {
  std::size_t n{0};
  double min{0.0};
  double max{0.0};
  double mean{0.0};
  double std_sample{0.0};
  double std_population{0.0};
};

/// Parsed VIA-style annotation document: image id -> ground-truth boxes.
struct AnnotationSet {
  std::map<std::string, std::vector<Detection>> images;
  /// Regions with a shape other than "rect", skipped during parsing.
  std::size_t skipped_regions{0};
};

// VIA region form:
// { "<key>": { "filename": "...", "regions": [
//     { "shape_attributes": {"name": "rect", "x":.., "y":.., "width":.., "height":..},
//       "region_attributes": {"label": "Pod"} } ] } }
// Images are keyed by "filename" when present, otherwise by the top-level key.
// A "regions" value may also be an object keyed by region index (older VIA).
AnnotationSet parse_annotations(std::string_view text);
std::string serialize_annotations(const AnnotationSet& set);

/// One JSON object per line:
///   {"frame_id": 3, "detections": [{"x":..,"y":..,"w":..,"h":..,"score":..,"label":"Pod"}]}
/// Blank lines and lines starting with '#' are ignored. Frames are returned in
/// ascending frame_id.
std::vector<FrameRecord> parse_detections(std::istream& in);
std::vector<FrameRecord> parse_detections(std::string_view text);
void write_detections(std::ostream& out, std::span<const FrameRecord> frames);
std::string serialize_detections(std::span<const FrameRecord> frames);

/// Delimited table with header plot_id,side,frame_start,frame_end,ground_truth_pods.
std::vector<PlotMeta> parse_plot_meta(std::istream& in);
void write_plot_meta(std::ostream& out, std::span<const PlotMeta> plots);

DatasetStats dataset_stats(std::span<const std::int64_t> counts);

/// Plain list of integer counts separated by whitespace or commas; '#' starts
/// a comment line. A metadata table (detected by its header) yields one count
/// per distinct plot_id.
std::vector<std::int64_t> parse_counts(std::istream& in);

std::vector<FrameRecord> read_detections_file(const std::string& path);
void write_detections_file(const std::string& path,
                           std::span<const FrameRecord> frames);
std::vector<PlotMeta> read_plot_meta_file(const std::string& path);
void write_plot_meta_file(const std::string& path,
                          std::span<const PlotMeta> plots);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace podcount
