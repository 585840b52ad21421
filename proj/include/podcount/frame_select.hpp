#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "podcount/data_model.hpp"
#include "podcount/tracker.hpp"

namespace podcount {

struct FrameSelection {
  std::vector<std::int64_t> frames;
  /// Set when the range is too short for n distinct frames.
  bool short_range{false};
};

/// n evenly spaced interior frames of [start, end]:
///   frame_k = round_half_up(start + (end - start) * (k + 1) / (n + 1)).
/// Evaluated in integer arithmetic so results are exact.
/// Throws InvalidRange unless start <= end and n >= 1.
FrameSelection select_frames(std::int64_t start, std::int64_t end, int n);

struct View {
  Side side{Side::A};
  std::int64_t frame{0};
  /// Plot region in the frame; featurization is cropped to it when present.
  std::optional<BoundingBox> roi;

  friend bool operator==(const View&, const View&) = default;
};

struct ViewSet {
  std::string plot_id;
  /// Grouped by side in Side enum order, frames ascending within a side.
  std::vector<View> views;
  int views_per_side{1};
  /// 0 for the base selection, 1.. for augmented variants.
  int sample_index{0};
  std::int64_t ground_truth_pods{0};
};

struct AugmentationConfig {
  /// Number of ViewSets per plot, including the base selection.
  int factor{1};
  /// Frame shift between consecutive variants; variants use offsets
  /// 0, +shift, -shift, +2*shift, -2*shift, ... clamped to the plot range.
  int shift{1};
};

/// One ViewSet per plot (times the augmentation factor). `required_sides`
/// defaults to every side present in `plots`. Throws MissingSide when a plot
/// lacks a required side and InconsistentGroundTruth when a plot's sides
/// disagree on the pod count.
std::vector<ViewSet> build_view_sets(std::span<const PlotMeta> plots,
                                     int n_per_side,
                                     std::span<const Side> required_sides = {},
                                     AugmentationConfig augmentation = {});

/// Replaces expert frame ranges of one side with tracker lifetimes: each
/// track is assigned to the plot whose expert range it overlaps most, and a
/// plot takes the union of its tracks' [first_frame, last_seen_frame].
/// Plots no track overlaps keep their expert range.
std::vector<PlotMeta> ranges_from_tracks(std::span<const PlotMeta> plots,
                                         Side side,
                                         std::span<const Track> tracks);

/// Sets each view's roi to the box of the tracked plot in that frame, taken
/// from the nearest frame in which the plot's track was observed. Views of
/// sides without tracking data are left unchanged.
struct SideTracking {
  Side side{Side::A};
  const TrackingResult* tracking{nullptr};
  std::span<const FrameRecord> frames;
  std::span<const PlotMeta> plots;
};
void attach_track_regions(std::span<ViewSet> view_sets,
                          std::span<const SideTracking> sides);

/// Manifest rows: plot_id,side,frame_id,sample_index,ground_truth_pods,
/// roi_x,roi_y,roi_w,roi_h (roi cells empty when absent).
std::string format_view_manifest(std::span<const ViewSet> view_sets);
std::vector<ViewSet> parse_view_manifest(std::string_view text);

}  // namespace podcount
