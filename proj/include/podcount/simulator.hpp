#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "podcount/data_model.hpp"

namespace podcount {

/// Synthetic field layout. Plots sit along one row, `plot_length` long and
/// separated by `plot_spacing`; a camera window of image_width pixels slides
/// past them at pass_speed pixels per frame, once per side.
struct FieldConfig {
  std::size_t n_plots{20};
  double pod_mean{599.9};
  double pod_std{196.60};
  std::int64_t pod_min{142};
  std::int64_t pod_max{1058};
  double plot_length{560.0};
  double plot_spacing{160.0};
  double plot_top{60.0};
  double plot_height{600.0};
  double pass_speed{24.0};
  /// Allowed range for the frames each plot occupies in a pass.
  std::int64_t frames_per_plot_min{11};
  std::int64_t frames_per_plot_max{98};
  double image_width{1280.0};
  double image_height{720.0};
  std::size_t plants_per_plot{12};
  /// Fraction of a plot's length that must be in view for a plot detection.
  double plot_visibility{0.5};
  std::vector<Side> sides{Side::A, Side::B};
  std::uint64_t seed{0};

  /// Throws InvalidConfig.
  void validate() const;
  [[nodiscard]] double pitch() const noexcept { return plot_length + plot_spacing; }
};

/// Detector noise. Occlusion hides whole plants per frame with probability
///   clamp(occlusion_base + occlusion_angle_slope * |angle| / (pi/2), 0, 1)
/// where angle is the bearing from the camera centre to the plant.
struct NoiseModel {
  double miss_rate{0.0};
  double false_positive_rate{0.0};
  double jitter_std{0.0};
  /// Beta(alpha, beta) confidence scores; alpha or beta <= 0 gives score 1.
  double score_alpha{0.0};
  double score_beta{0.0};
  double occlusion_base{0.0};
  double occlusion_angle_slope{0.0};

  void validate() const;
  [[nodiscard]] double occlusion_at(double angle_rad) const noexcept;
};

struct SyntheticPod {
  // World coordinates: x along the row, y from the top of the image.
  double x{0.0};
  double y{0.0};
  double w{0.0};
  double h{0.0};
  std::size_t plant{0};
};

struct SyntheticPlot {
  std::string plot_id;
  std::int64_t true_pod_count{0};
  double x0{0.0};
  double x1{0.0};
  std::vector<double> plant_x;
  std::vector<SyntheticPod> pods;
};

struct SyntheticField {
  FieldConfig config;
  std::vector<SyntheticPlot> plots;
  std::int64_t frames_per_pass{0};
  /// Expert frame range per plot and side: the frames in which the plot's
  /// centre lies within half a pitch of the image centre (disjoint per pass).
  std::vector<PlotMeta> plot_meta;
};

/// Deterministic in config.seed. Pod counts are rounded normal draws
/// rejected outside [pod_min, pod_max]. Zero plots give an empty field with
/// no frames. Throws InvalidConfig.
SyntheticField generate_field(const FieldConfig& config);

struct RenderOptions {
  bool pods{true};
  /// When set, pod detections are rendered only for these frames.
  std::optional<std::set<std::int64_t>> pod_frames;
};

struct PassRender {
  std::vector<FrameRecord> noisy;
  std::vector<FrameRecord> truth;
  /// Per noisy detection: index of the truth detection of the same frame it
  /// was drawn from, or -1 for a spurious detection.
  std::vector<std::vector<std::int64_t>> sources;
};

/// Renders one side's pass. Every frame draws from its own generator seeded
/// by (field seed, side, frame), so a frame renders identically whatever
/// subset of frames is requested.
PassRender render_pass(const SyntheticField& field, Side side,
                       const NoiseModel& noise, const RenderOptions& options = {});

struct TruthExport {
  std::string plot_meta_csv;
  /// Per-plot annotation document: one image per plot holding all its pods
  /// in plot-local coordinates.
  std::string annotations_json;
};
TruthExport export_truth(const SyntheticField& field);

std::string field_config_to_json(const FieldConfig& config);
FieldConfig field_config_from_json(std::string_view text);
std::string noise_model_to_json(const NoiseModel& noise);
NoiseModel noise_model_from_json(std::string_view text);

/// Noise used by the end-to-end experiments: 10% misses, two spurious pods a
/// frame, 2 px jitter, Beta(8, 2) scores, and 40% plant occlusion per view.
NoiseModel default_field_noise();

}  // namespace podcount
