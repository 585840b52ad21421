#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "podcount/data_model.hpp"
#include "podcount/featurize.hpp"
#include "podcount/frame_select.hpp"
#include "podcount/ranking.hpp"
#include "podcount/regressor.hpp"
#include "podcount/simulator.hpp"
#include "podcount/tracker.hpp"

namespace podcount {

inline constexpr std::string_view kToolName = "podcount";
inline constexpr std::string_view kToolVersion = "0.1.0";
/// Channels produced per view by the featurizer.
inline constexpr std::size_t kChannelsPerView = 3;

/// Regressor settings used by the pipeline: the default architecture trained
/// for 20 epochs in batches of 32. Longer training or smaller batches overfit
/// the ~100-plot synthetic fields.
NetworkConfig default_pipeline_network();

struct PipelineConfig {
  FieldConfig field;
  NoiseModel noise{default_field_noise()};
  TrackerConfig tracker{5, 200.0};
  /// Use plot tracks for frame ranges and crop regions; otherwise the expert
  /// ranges from the metadata and whole frames.
  bool use_tracking{true};
  /// One model is trained per entry.
  std::vector<int> views_per_side{3};
  GridSize grid{16, 16};
  /// Applied to training plots only.
  AugmentationConfig augmentation{3, 2};
  double test_fraction{0.3};
  std::vector<double> cutoffs{0.2, 0.3};
  /// Views and input shape are filled in per run.
  NetworkConfig network{default_pipeline_network()};
  std::uint64_t seed{0};

  /// Throws InvalidConfig.
  void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& config);
/// Keys missing from the document keep their defaults.
PipelineConfig pipeline_config_from_json(std::string_view text);

/// Network for `views_per_side` views on each configured side.
NetworkConfig network_for(const PipelineConfig& config, int views_per_side);

// ---------------------------------------------------------------------------
// In-memory stages

/// Tracks the plot detections of one pass.
TrackingResult track_plots(std::span<const FrameRecord> frames,
                           const TrackerConfig& config);

/// Test plots: a seeded shuffle of the distinct plot ids, first
/// round(fraction * n) taken (at least one, and at least one left to train).
std::set<std::string> choose_test_plots(std::span<const PlotMeta> plots,
                                        double fraction, std::uint64_t seed);

struct SideInput {
  Side side{Side::A};
  /// Frames holding at least the plot detections the tracks refer to.
  std::span<const FrameRecord> frames;
  /// Null when tracking is not used for this side.
  const TrackingResult* tracking{nullptr};
};

struct ViewPlanOptions {
  int views_per_side{3};
  AugmentationConfig augmentation{};
  std::vector<Side> sides;
};

/// Frame ranges (from tracks when available), view selection and crop
/// regions. Augmented variants are kept for training plots only.
std::vector<ViewSet> plan_views(std::span<const PlotMeta> plots,
                                std::span<const SideInput> sides,
                                const ViewPlanOptions& options,
                                const std::set<std::string>& test_plots);

using FrameIndex = std::map<Side, std::map<std::int64_t, const FrameRecord*>>;

/// Pod heatmaps of every view, stacked along the channel axis in view order.
/// Views with a crop region are featurized inside it. Throws MissingFrame
/// when a view's frame is absent.
FeatureGrid featurize_view_set(const ViewSet& view_set, const FrameIndex& frames,
                               ImageSize image, GridSize grid);

/// Inverse of the stacking above.
std::vector<FeatureGrid> split_views(const FeatureGrid& stacked,
                                     std::size_t channels_per_view = kChannelsPerView);

struct SampleRecord {
  std::string plot_id;
  int sample_index{0};
  bool train{true};
  std::int64_t ground_truth_pods{0};
  std::size_t views{0};
  FeatureGrid grid;
  /// Grid file relative to the sample table, when stored on disk.
  std::string grid_file;
};

struct PredictionRow {
  std::string plot_id;
  std::int64_t ground_truth_pods{0};
  double predicted{0.0};
};

/// Trains a fresh network on the training samples.
Network fit_model(std::span<const SampleRecord> samples, const NetworkConfig& config,
                  TrainReport* report = nullptr);

/// Predictions for the base (sample_index 0) test samples, in input order.
std::vector<PredictionRow> predict_samples(const Network& net,
                                           std::span<const SampleRecord> samples);

RankingReport rank_predictions(std::span<const PredictionRow> rows,
                               std::span<const double> cutoffs);

struct ExperimentResult {
  int views_per_side{0};
  std::size_t n_train{0};
  std::size_t n_test{0};
  TrainReport training;
  std::vector<PredictionRow> predictions;
  RankingReport ranking;
};

/// Whole pipeline without intermediate files, one result per entry of
/// config.views_per_side. Pod detections are rendered only for the frames
/// the views use; because every simulated frame has its own random stream
/// the results equal those of the file-based stages.
std::vector<ExperimentResult> run_experiment(const PipelineConfig& config,
                                             std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// File-based stages used by the command-line tool

namespace fs = std::filesystem;

/// "# podcount <version>" plus one "# input <name> <fnv1a64>" line per input.
std::string provenance_header(std::span<const fs::path> inputs);
std::string hash_file_hex(const fs::path& path);

struct DatasetPaths {
  fs::path dir;
  [[nodiscard]] fs::path scenario() const { return dir / "scenario.json"; }
  [[nodiscard]] fs::path metadata() const { return dir / "metadata.csv"; }
  [[nodiscard]] fs::path annotations() const { return dir / "annotations.json"; }
  [[nodiscard]] fs::path detections(Side s) const;
  [[nodiscard]] fs::path truth(Side s) const;
  [[nodiscard]] fs::path provenance() const { return dir / "provenance.json"; }
  [[nodiscard]] fs::path manifest() const { return dir / "manifest.json"; }
};

/// Writes scenario.json, metadata.csv, annotations.json, detections_<side>
/// and truth_<side> streams, provenance.json and manifest.json (file
/// hashes). Returns the manifest hash.
std::string stage_simulate(const FieldConfig& field, const NoiseModel& noise,
                           const fs::path& out_dir);

/// Tracks the detections of a detections file carrying `label` (all
/// detections when empty). Writes the per-observation records and the track
/// summary table.
void stage_track(const fs::path& detections, const TrackerConfig& config,
                 const fs::path& records_out, const fs::path& summary_out,
                 std::string_view label = kPlotLabel);

/// Reads the manifest written by stage_simulate.
struct DatasetInfo {
  std::vector<Side> sides;
  ImageSize image;
};
DatasetInfo read_dataset_info(const fs::path& dataset_dir);

struct FeaturizeOptions {
  int views_per_side{3};
  GridSize grid{16, 16};
  ImageSize image{};
  AugmentationConfig augmentation{};
  double test_fraction{0.3};
  std::uint64_t seed{0};
};

struct FeaturizeInputs {
  fs::path metadata;
  std::map<Side, fs::path> detections;
  /// Sides without a tracks file use expert ranges and whole frames.
  std::map<Side, fs::path> tracks;
};

/// Writes views.csv, samples.csv and grids/<plot>_<sample>.pcfg into out_dir.
void stage_featurize(const FeaturizeInputs& inputs, const FeaturizeOptions& options,
                     const fs::path& out_dir);

std::vector<SampleRecord> read_samples(const fs::path& samples_csv);
void write_samples(const fs::path& samples_csv, std::span<const SampleRecord> samples,
                   const std::string& header);

/// Trains on the "train" rows of a sample table; writes the checkpoint and a
/// per-epoch loss log. The network's views and input shape come from the
/// samples.
TrainReport stage_train(const fs::path& samples_csv, NetworkConfig config,
                        const fs::path& model_out, const fs::path& log_out);

/// Predicts the base "test" rows of a sample table.
void stage_predict(const fs::path& model, const fs::path& samples_csv,
                   const fs::path& predictions_out);

std::vector<PredictionRow> read_predictions(const fs::path& path);
void write_predictions(const fs::path& path, std::span<const PredictionRow> rows,
                       const std::string& header);

/// Writes ranking.csv (Table-style), correlation.csv and scatter.svg into
/// out_dir.
RankingReport stage_rank(const fs::path& predictions, std::span<const double> cutoffs,
                         const std::string& model_label, const fs::path& out_dir);

/// Columns model,cutoff,tp,tn,fp,fn; one row per model x cutoff.
std::vector<ModelColumn> parse_confusion_table(std::string_view text);

/// Rows statistic,value for n, min, max, mean, std_sample, std_population.
std::string format_stats(const DatasetStats& stats);

struct PipelineRun {
  int views_per_side{0};
  RankingReport ranking;
  fs::path dir;
};

/// simulate -> track -> select -> featurize -> train -> predict -> rank with
/// every intermediate written under out_dir, plus summary.json and, for more
/// than one view count, comparison.csv. A failing stage is rethrown with the
/// stage name prefixed to the message.
std::vector<PipelineRun> run_pipeline(const PipelineConfig& config,
                                      const fs::path& out_dir,
                                      std::ostream* log = nullptr);

/// Summary document for one run.
std::string summary_json(const PipelineConfig& config, const PipelineRun& run,
                         std::size_t n_train);

}  // namespace podcount
