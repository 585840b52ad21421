#include "podcount/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "podcount/error.hpp"
#include "podcount/rng.hpp"

namespace podcount {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;  // "split"

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, what);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string hash_text(std::string_view text) {
  return hex64(fnv1a64(std::span(reinterpret_cast<const unsigned char*>(text.data()),
                                 text.size())));
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Header-keyed rows of a comma-separated table; '#' lines are comments.
std::vector<std::map<std::string, std::string>> read_table(std::string_view text,
                                                           const std::string& what) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cells = split_cells(line);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MalformedLine, what + " line " + std::to_string(line_no) +
                                                ": expected " + std::to_string(header.size()) +
                                                " cells");
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

const std::string& cell(const std::map<std::string, std::string>& row, const std::string& key,
                        const std::string& what) {
  const auto it = row.find(key);
  if (it == row.end()) throw Error(ErrorCode::MissingField, what + ": missing column " + key);
  return it->second;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    T value{};
    if constexpr (std::is_floating_point_v<T>) {
      value = static_cast<T>(std::stod(text, &used));
    } else {
      value = static_cast<T>(std::stoll(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedLine, what + ": not a number: '" + text + "'");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

std::string sample_grid_name(const SampleRecord& s) {
  return "grids/" + s.plot_id + "_" + std::to_string(s.sample_index) + ".pcfg";
}

json cutoffs_json(const RankingReport& r) {
  json arr = json::array();
  for (const auto& c : r.cutoffs) {
    arr.push_back({{"fraction", c.fraction},
                   {"tp", c.counts.tp},
                   {"tn", c.counts.tn},
                   {"fp", c.counts.fp},
                   {"fn", c.counts.fn},
                   {"accuracy", c.metrics.accuracy},
                   {"sensitivity", c.metrics.sensitivity},
                   {"specificity", c.metrics.specificity}});
  }
  return arr;
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

NetworkConfig default_pipeline_network() {
  NetworkConfig n;
  n.epochs = 20;
  n.batch_size = 32;
  return n;
}

void PipelineConfig::validate() const {
  field.validate();
  noise.validate();
  tracker.validate();
  if (views_per_side.empty()) invalid("views_per_side must list at least one count");
  for (int v : views_per_side) {
    if (v < 1) invalid("views_per_side entries must be positive");
  }
  if (grid.width == 0 || grid.height == 0) invalid("grid size must be positive");
  if (augmentation.factor < 1 || augmentation.shift < 0) invalid("augmentation out of range");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) invalid("test_fraction must lie in (0, 1)");
  for (double c : cutoffs) {
    if (!(c > 0.0 && c < 1.0)) invalid("cutoffs must lie in (0, 1)");
  }
  network_for(*this, views_per_side.front()).validate();
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["field"] = json::parse(field_config_to_json(c.field));
  j["noise"] = json::parse(noise_model_to_json(c.noise));
  j["tracker"] = {{"expiry_frames", c.tracker.expiry_frames},
                  {"max_match_distance", std::isfinite(c.tracker.max_match_distance)
                                             ? json(c.tracker.max_match_distance)
                                             : json(nullptr)}};
  j["use_tracking"] = c.use_tracking;
  j["views_per_side"] = c.views_per_side;
  j["grid"] = {{"width", c.grid.width}, {"height", c.grid.height}};
  j["augmentation"] = {{"factor", c.augmentation.factor}, {"shift", c.augmentation.shift}};
  j["test_fraction"] = c.test_fraction;
  j["cutoffs"] = c.cutoffs;
  j["network"] = json::parse(network_config_to_json(c.network));
  return j.dump(2);
}

PipelineConfig pipeline_config_from_json(std::string_view text) {
  PipelineConfig c;
  try {
    const json j = json::parse(text);
    c.seed = j.value("seed", c.seed);
    if (j.contains("field")) c.field = field_config_from_json(j.at("field").dump());
    if (j.contains("noise")) c.noise = noise_model_from_json(j.at("noise").dump());
    if (j.contains("tracker")) {
      const auto& t = j.at("tracker");
      c.tracker.expiry_frames = t.value("expiry_frames", c.tracker.expiry_frames);
      if (t.contains("max_match_distance")) {
        const auto& d = t.at("max_match_distance");
        c.tracker.max_match_distance =
            d.is_null() ? std::numeric_limits<double>::infinity() : d.get<double>();
      }
    }
    c.use_tracking = j.value("use_tracking", c.use_tracking);
    if (j.contains("views_per_side")) {
      const auto& v = j.at("views_per_side");
      c.views_per_side = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
    }
    if (j.contains("grid")) {
      c.grid.width = j.at("grid").value("width", c.grid.width);
      c.grid.height = j.at("grid").value("height", c.grid.height);
    }
    if (j.contains("augmentation")) {
      c.augmentation.factor = j.at("augmentation").value("factor", c.augmentation.factor);
      c.augmentation.shift = j.at("augmentation").value("shift", c.augmentation.shift);
    }
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (j.contains("cutoffs")) c.cutoffs = j.at("cutoffs").get<std::vector<double>>();
    if (j.contains("network")) c.network = network_config_from_json(j.at("network").dump());
  } catch (const json::exception& e) {
    invalid(std::string("pipeline config: ") + e.what());
  }
  return c;
}

NetworkConfig network_for(const PipelineConfig& config, int views_per_side) {
  NetworkConfig n = config.network;
  n.views = static_cast<std::size_t>(views_per_side) * config.field.sides.size();
  n.input_channels = kChannelsPerView;
  n.input_height = config.grid.height;
  n.input_width = config.grid.width;
  n.seed = config.seed;
  return n;
}

// ---------------------------------------------------------------------------
// In-memory stages

TrackingResult track_plots(std::span<const FrameRecord> frames, const TrackerConfig& config) {
  return run_sequence(frames, config, kPlotLabel);
}

std::set<std::string> choose_test_plots(std::span<const PlotMeta> plots, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) invalid("test fraction must lie in (0, 1)");
  std::vector<std::string> ids;
  for (const auto& p : plots) {
    if (std::find(ids.begin(), ids.end(), p.plot_id) == ids.end()) ids.push_back(p.plot_id);
  }
  if (ids.size() < 2) {
    throw Error(ErrorCode::EmptySampleSet, "a train/test split needs at least two plots");
  }
  Rng rng(seed ^ kSplitStream);
  rng.shuffle(std::span(ids));
  const auto n = static_cast<long long>(ids.size());
  const auto n_test = std::clamp(std::llround(fraction * static_cast<double>(n)), 1LL, n - 1);
  return {ids.begin(), ids.begin() + n_test};
}

std::vector<ViewSet> plan_views(std::span<const PlotMeta> plots,
                                std::span<const SideInput> sides,
                                const ViewPlanOptions& options,
                                const std::set<std::string>& test_plots) {
  std::vector<PlotMeta> ranges(plots.begin(), plots.end());
  for (const auto& s : sides) {
    if (s.tracking != nullptr) ranges = ranges_from_tracks(ranges, s.side, s.tracking->tracks);
  }
  auto view_sets =
      build_view_sets(ranges, options.views_per_side, options.sides, options.augmentation);
  std::vector<SideTracking> tracked;
  for (const auto& s : sides) {
    if (s.tracking != nullptr) tracked.push_back({s.side, s.tracking, s.frames, ranges});
  }
  attach_track_regions(view_sets, tracked);
  std::erase_if(view_sets, [&](const ViewSet& vs) {
    return vs.sample_index > 0 && test_plots.contains(vs.plot_id);
  });
  return view_sets;
}

FeatureGrid featurize_view_set(const ViewSet& view_set, const FrameIndex& frames,
                               ImageSize image, GridSize grid) {
  std::vector<float> data;
  std::size_t channels = 0;
  std::vector<Detection> pods;
  for (const auto& v : view_set.views) {
    const auto side_it = frames.find(v.side);
    const FrameRecord* record = nullptr;
    if (side_it != frames.end()) {
      const auto it = side_it->second.find(v.frame);
      if (it != side_it->second.end()) record = it->second;
    }
    if (record == nullptr) {
      throw Error(ErrorCode::MissingFrame, "plot " + view_set.plot_id + " side " +
                                               std::string(to_string(v.side)) + " frame " +
                                               std::to_string(v.frame) + " has no detections");
    }
    pods.clear();
    for (const auto& d : record->detections) {
      if (d.label == kPodLabel) pods.push_back(d);
    }
    const FeatureGrid g =
        v.roi ? detection_heatmap_in(pods, *v.roi, grid) : detection_heatmap(pods, image, grid);
    data.insert(data.end(), g.data().begin(), g.data().end());
    channels += g.channels();
  }
  return FeatureGrid(channels, grid.height, grid.width, std::move(data));
}

std::vector<FeatureGrid> split_views(const FeatureGrid& stacked, std::size_t channels_per_view) {
  if (channels_per_view == 0 || stacked.channels() % channels_per_view != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                std::to_string(stacked.channels()) + " channels do not split into views of " +
                    std::to_string(channels_per_view));
  }
  const std::size_t plane = stacked.height() * stacked.width() * channels_per_view;
  std::vector<FeatureGrid> views;
  for (std::size_t off = 0; off < stacked.data().size(); off += plane) {
    const auto src = stacked.data().subspan(off, plane);
    views.emplace_back(channels_per_view, stacked.height(), stacked.width(),
                       std::vector<float>(src.begin(), src.end()));
  }
  return views;
}

Network fit_model(std::span<const SampleRecord> samples, const NetworkConfig& config,
                  TrainReport* report) {
  std::vector<TrainSample> train_set;
  for (const auto& s : samples) {
    if (!s.train) continue;
    train_set.push_back({split_views(s.grid), static_cast<double>(s.ground_truth_pods)});
  }
  Network net(config);
  TrainReport r = train(net, train_set);
  if (report != nullptr) *report = std::move(r);
  return net;
}

std::vector<PredictionRow> predict_samples(const Network& net,
                                           std::span<const SampleRecord> samples) {
  std::vector<std::vector<FeatureGrid>> inputs;
  std::vector<PredictionRow> rows;
  for (const auto& s : samples) {
    if (s.train || s.sample_index != 0) continue;
    inputs.push_back(split_views(s.grid));
    rows.push_back({s.plot_id, s.ground_truth_pods, 0.0});
  }
  const auto out = predict(net, inputs);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].predicted = out[i];
  return rows;
}

RankingReport rank_predictions(std::span<const PredictionRow> rows,
                               std::span<const double> cutoffs) {
  std::vector<double> gt, pred;
  for (const auto& r : rows) {
    gt.push_back(static_cast<double>(r.ground_truth_pods));
    pred.push_back(r.predicted);
  }
  return ranking_report(gt, pred, cutoffs);
}

std::vector<ExperimentResult> run_experiment(const PipelineConfig& config, std::ostream* log) {
  config.validate();
  FieldConfig fc = config.field;
  fc.seed = config.seed;
  const SyntheticField field = generate_field(fc);
  const auto test = choose_test_plots(field.plot_meta, config.test_fraction, config.seed);
  const ImageSize image{fc.image_width, fc.image_height};

  std::map<Side, std::vector<FrameRecord>> plot_frames;
  std::map<Side, TrackingResult> tracks;
  for (Side side : fc.sides) {
    plot_frames[side] = render_pass(field, side, config.noise, {false, std::nullopt}).noisy;
    if (config.use_tracking) tracks[side] = track_plots(plot_frames[side], config.tracker);
  }
  std::vector<SideInput> inputs;
  for (Side side : fc.sides) {
    inputs.push_back({side, plot_frames[side],
                      config.use_tracking ? &tracks.at(side) : nullptr});
  }

  std::vector<std::vector<ViewSet>> plans;
  std::map<Side, std::set<std::int64_t>> needed;
  for (int v : config.views_per_side) {
    plans.push_back(
        plan_views(field.plot_meta, inputs, {v, config.augmentation, fc.sides}, test));
    for (const auto& vs : plans.back()) {
      for (const auto& view : vs.views) needed[view.side].insert(view.frame);
    }
  }
  plot_frames.clear();

  std::map<Side, std::vector<FrameRecord>> pod_frames;
  FrameIndex index;
  for (Side side : fc.sides) {
    auto rendered = render_pass(field, side, config.noise, {true, needed[side]}).noisy;
    std::erase_if(rendered, [&](const FrameRecord& f) { return !needed[side].contains(f.frame_id); });
    pod_frames[side] = std::move(rendered);
    for (const auto& f : pod_frames[side]) index[side][f.frame_id] = &f;
  }

  std::vector<ExperimentResult> results;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const int v = config.views_per_side[k];
    std::vector<SampleRecord> samples;
    for (const auto& vs : plans[k]) {
      SampleRecord s;
      s.plot_id = vs.plot_id;
      s.sample_index = vs.sample_index;
      s.train = !test.contains(vs.plot_id);
      s.ground_truth_pods = vs.ground_truth_pods;
      s.views = vs.views.size();
      s.grid = featurize_view_set(vs, index, image, config.grid);
      samples.push_back(std::move(s));
    }
    ExperimentResult r;
    r.views_per_side = v;
    r.n_train = static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.train; }));
    const Network net = fit_model(samples, network_for(config, v), &r.training);
    r.predictions = predict_samples(net, samples);
    r.n_test = r.predictions.size();
    r.ranking = rank_predictions(r.predictions, config.cutoffs);
    if (log != nullptr) {
      *log << "seed " << config.seed << " views/side " << v << ": train " << r.n_train
           << " test " << r.n_test << " r "
           << (r.ranking.pearson_r ? format_double(*r.ranking.pearson_r) : "n/a") << '\n';
    }
    results.push_back(std::move(r));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Files

std::string hash_file_hex(const fs::path& path) { return hash_text(read_text_file(path.string())); }

std::string provenance_header(std::span<const fs::path> inputs) {
  std::string out = "# " + std::string(kToolName) + " " + std::string(kToolVersion) + "\n";
  for (const auto& p : inputs) {
    out += "# input " + p.filename().string() + " " + hash_file_hex(p) + "\n";
  }
  return out;
}

fs::path DatasetPaths::detections(Side s) const {
  return dir / ("detections_" + std::string(to_string(s)) + ".jsonl");
}

fs::path DatasetPaths::truth(Side s) const {
  return dir / ("truth_" + std::string(to_string(s)) + ".jsonl");
}

std::string stage_simulate(const FieldConfig& field_config, const NoiseModel& noise,
                           const fs::path& out_dir) {
  noise.validate();
  const SyntheticField field = generate_field(field_config);
  ensure_dir(out_dir);
  const DatasetPaths paths{out_dir};

  const json scenario = {{"field", json::parse(field_config_to_json(field_config))},
                         {"noise", json::parse(noise_model_to_json(noise))}};
  const std::string scenario_text = scenario.dump(2) + "\n";
  write_text_file(paths.scenario().string(), scenario_text);

  const TruthExport truth = export_truth(field);
  write_text_file(paths.metadata().string(), truth.plot_meta_csv);
  write_text_file(paths.annotations().string(), truth.annotations_json);
  std::vector<fs::path> files{paths.scenario(), paths.metadata(), paths.annotations()};
  for (Side side : field_config.sides) {
    const PassRender pass = render_pass(field, side, noise);
    write_detections_file(paths.detections(side).string(), pass.noisy);
    write_detections_file(paths.truth(side).string(), pass.truth);
    files.push_back(paths.detections(side));
    files.push_back(paths.truth(side));
  }

  const json provenance = {{"tool", kToolName},
                           {"version", kToolVersion},
                           {"seed", field_config.seed},
                           {"config_hash", hash_text(scenario_text)}};
  write_text_file(paths.provenance().string(), provenance.dump(2) + "\n");
  files.push_back(paths.provenance());

  json sides = json::array();
  for (Side s : field_config.sides) sides.push_back(std::string(to_string(s)));
  json hashes = json::object();
  for (const auto& f : files) hashes[f.filename().string()] = hash_file_hex(f);
  const json manifest = {{"tool", kToolName},
                         {"version", kToolVersion},
                         {"n_plots", field_config.n_plots},
                         {"frames_per_pass", field.frames_per_pass},
                         {"image", {{"width", field_config.image_width},
                                    {"height", field_config.image_height}}},
                         {"sides", sides},
                         {"files", hashes}};
  const std::string manifest_text = manifest.dump(2) + "\n";
  write_text_file(paths.manifest().string(), manifest_text);
  return hash_text(manifest_text);
}

void stage_track(const fs::path& detections, const TrackerConfig& config,
                 const fs::path& records_out, const fs::path& summary_out,
                 std::string_view label) {
  config.validate();
  const auto frames = read_detections_file(detections.string());
  const TrackingResult result = run_sequence(frames, config, label);
  const std::vector<fs::path> inputs{detections};
  const std::string header = provenance_header(inputs);
  write_text_file(records_out.string(), header + format_track_records(result));
  write_text_file(summary_out.string(), header + format_track_summary(result));
}

DatasetInfo read_dataset_info(const fs::path& dataset_dir) {
  const DatasetPaths paths{dataset_dir};
  DatasetInfo info;
  try {
    const json m = json::parse(read_text_file(paths.manifest().string()));
    for (const auto& s : m.at("sides")) info.sides.push_back(parse_side(s.get<std::string>()));
    info.image.width = m.at("image").at("width").get<double>();
    info.image.height = m.at("image").at("height").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument,
                paths.manifest().string() + ": " + std::string(e.what()));
  }
  return info;
}

void write_samples(const fs::path& samples_csv, std::span<const SampleRecord> samples,
                   const std::string& header) {
  std::ostringstream out;
  out << header << "plot_id,sample_index,split,ground_truth_pods,views,grid\n";
  for (const auto& s : samples) {
    out << s.plot_id << ',' << s.sample_index << ',' << (s.train ? "train" : "test") << ','
        << s.ground_truth_pods << ',' << s.views << ',' << s.grid_file << '\n';
  }
  write_text_file(samples_csv.string(), out.str());
}

std::vector<SampleRecord> read_samples(const fs::path& samples_csv) {
  const std::string what = samples_csv.filename().string();
  std::vector<SampleRecord> out;
  for (const auto& row : read_table(read_text_file(samples_csv.string()), what)) {
    SampleRecord s;
    s.plot_id = cell(row, "plot_id", what);
    s.sample_index = parse_number<int>(cell(row, "sample_index", what), what);
    const auto& split = cell(row, "split", what);
    if (split != "train" && split != "test") {
      throw Error(ErrorCode::MalformedLine, what + ": split must be train or test");
    }
    s.train = split == "train";
    s.ground_truth_pods = parse_number<std::int64_t>(cell(row, "ground_truth_pods", what), what);
    s.views = parse_number<std::size_t>(cell(row, "views", what), what);
    s.grid_file = cell(row, "grid", what);
    s.grid = load_feature_grid((samples_csv.parent_path() / s.grid_file).string());
    if (s.grid.channels() != s.views * kChannelsPerView) {
      throw Error(ErrorCode::ShapeMismatch, what + ": grid of " + s.plot_id + " has " +
                                                std::to_string(s.grid.channels()) +
                                                " channels for " + std::to_string(s.views) +
                                                " views");
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error(ErrorCode::EmptySampleSet, what + " lists no samples");
  return out;
}

void stage_featurize(const FeaturizeInputs& inputs, const FeaturizeOptions& options,
                     const fs::path& out_dir) {
  if (inputs.detections.empty()) {
    throw Error(ErrorCode::MissingSide, "featurize needs at least one detections file");
  }
  const auto meta = read_plot_meta_file(inputs.metadata.string());
  std::vector<fs::path> input_files{inputs.metadata};
  std::vector<Side> sides;
  std::map<Side, std::vector<FrameRecord>> frames;
  std::map<Side, TrackingResult> tracks;
  for (const auto& [side, path] : inputs.detections) {
    sides.push_back(side);
    frames[side] = read_detections_file(path.string());
    input_files.push_back(path);
  }
  for (const auto& [side, path] : inputs.tracks) {
    if (!frames.contains(side)) {
      throw Error(ErrorCode::MissingSide, "tracks given for side " +
                                              std::string(to_string(side)) +
                                              " without detections");
    }
    tracks[side] = parse_track_records(read_text_file(path.string()), frames[side]);
    input_files.push_back(path);
  }
  std::vector<SideInput> side_inputs;
  FrameIndex index;
  for (Side side : sides) {
    const auto it = tracks.find(side);
    side_inputs.push_back({side, frames[side], it == tracks.end() ? nullptr : &it->second});
    for (const auto& f : frames[side]) index[side][f.frame_id] = &f;
  }

  const auto test = choose_test_plots(meta, options.test_fraction, options.seed);
  const auto view_sets = plan_views(
      meta, side_inputs, {options.views_per_side, options.augmentation, sides}, test);

  ensure_dir(out_dir / "grids");
  const std::string header = provenance_header(input_files);
  write_text_file((out_dir / "views.csv").string(), header + format_view_manifest(view_sets));

  std::vector<SampleRecord> samples;
  for (const auto& vs : view_sets) {
    SampleRecord s;
    s.plot_id = vs.plot_id;
    s.sample_index = vs.sample_index;
    s.train = !test.contains(vs.plot_id);
    s.ground_truth_pods = vs.ground_truth_pods;
    s.views = vs.views.size();
    s.grid = featurize_view_set(vs, index, options.image, options.grid);
    s.grid_file = sample_grid_name(s);
    save_feature_grid((out_dir / s.grid_file).string(), s.grid);
    samples.push_back(std::move(s));
  }
  write_samples(out_dir / "samples.csv", samples, header);
}

TrainReport stage_train(const fs::path& samples_csv, NetworkConfig config,
                        const fs::path& model_out, const fs::path& log_out) {
  const auto samples = read_samples(samples_csv);
  const auto& first = samples.front();
  config.views = first.views;
  config.input_channels = kChannelsPerView;
  config.input_height = first.grid.height();
  config.input_width = first.grid.width();
  config.validate();
  TrainReport report;
  const Network net = fit_model(samples, config, &report);
  save_model(model_out.string(), net);

  std::ostringstream log;
  const std::vector<fs::path> inputs{samples_csv};
  log << provenance_header(inputs) << "epoch,loss\n";
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
    log << e + 1 << ',' << format_double(report.epoch_losses[e]) << '\n';
  }
  write_text_file(log_out.string(), log.str());
  return report;
}

void write_predictions(const fs::path& path, std::span<const PredictionRow> rows,
                       const std::string& header) {
  std::ostringstream out;
  out << header << "plot_id,ground_truth_pods,predicted\n";
  for (const auto& r : rows) {
    out << r.plot_id << ',' << r.ground_truth_pods << ',' << format_double(r.predicted) << '\n';
  }
  write_text_file(path.string(), out.str());
}

std::vector<PredictionRow> read_predictions(const fs::path& path) {
  const std::string what = path.filename().string();
  std::vector<PredictionRow> rows;
  for (const auto& row : read_table(read_text_file(path.string()), what)) {
    rows.push_back({cell(row, "plot_id", what),
                    parse_number<std::int64_t>(cell(row, "ground_truth_pods", what), what),
                    parse_number<double>(cell(row, "predicted", what), what)});
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyDataset, what + " holds no predictions");
  return rows;
}

void stage_predict(const fs::path& model, const fs::path& samples_csv,
                   const fs::path& predictions_out) {
  const Network net = load_model(model.string());
  const auto samples = read_samples(samples_csv);
  const auto rows = predict_samples(net, samples);
  if (rows.empty()) throw Error(ErrorCode::EmptySampleSet, "no test samples to predict");
  const std::vector<fs::path> inputs{model, samples_csv};
  write_predictions(predictions_out, rows, provenance_header(inputs));
}

RankingReport stage_rank(const fs::path& predictions, std::span<const double> cutoffs,
                         const std::string& model_label, const fs::path& out_dir) {
  const auto rows = read_predictions(predictions);
  const RankingReport report = rank_predictions(rows, cutoffs);
  ensure_dir(out_dir);
  const std::vector<fs::path> inputs{predictions};
  const std::string header = provenance_header(inputs);

  const std::vector<ModelColumn> columns{{model_label, report.cutoffs}};
  write_text_file((out_dir / "ranking.csv").string(), header + format_ranking_table(columns));

  std::ostringstream corr;
  corr << header << "statistic,value\n";
  corr << "n," << report.n << '\n';
  corr << "pearson_r," << (report.pearson_r ? format_double(*report.pearson_r) : "") << '\n';
  corr << "spearman_rho," << (report.spearman_rho ? format_double(*report.spearman_rho) : "")
       << '\n';
  write_text_file((out_dir / "correlation.csv").string(), corr.str());

  std::vector<double> gt, pred;
  for (const auto& r : rows) {
    gt.push_back(static_cast<double>(r.ground_truth_pods));
    pred.push_back(r.predicted);
  }
  write_text_file((out_dir / "scatter.svg").string(),
                  scatter_svg(gt, pred, model_label + ": predicted vs ground truth"));
  return report;
}

std::vector<ModelColumn> parse_confusion_table(std::string_view text) {
  const std::string what = "confusion counts";
  std::vector<ModelColumn> columns;
  for (const auto& row : read_table(text, what)) {
    const std::string& model = cell(row, "model", what);
    CutoffResult c;
    c.fraction = parse_number<double>(cell(row, "cutoff", what), what);
    auto count = [&](const char* key) {
      const auto v = parse_number<long long>(cell(row, key, what), what);
      if (v < 0) throw Error(ErrorCode::MalformedLine, what + ": negative count");
      return static_cast<std::size_t>(v);
    };
    c.counts = {count("tp"), count("tn"), count("fp"), count("fn")};
    c.metrics = classification_metrics(c.counts);
    auto it = std::find_if(columns.begin(), columns.end(),
                           [&](const ModelColumn& m) { return m.model == model; });
    if (it == columns.end()) {
      columns.push_back({model, {}});
      it = std::prev(columns.end());
    }
    it->cutoffs.push_back(c);
  }
  if (columns.empty()) throw Error(ErrorCode::EmptyDataset, "no confusion counts given");
  return columns;
}

std::string format_stats(const DatasetStats& s) {
  std::ostringstream out;
  out << "statistic,value\n";
  out << "n," << s.n << '\n';
  out << "min," << format_double(s.min) << '\n';
  out << "max," << format_double(s.max) << '\n';
  out << "mean," << format_double(s.mean) << '\n';
  out << "std_sample," << format_double(s.std_sample) << '\n';
  out << "std_population," << format_double(s.std_population) << '\n';
  return out.str();
}

std::string summary_json(const PipelineConfig& config, const PipelineRun& run,
                         std::size_t n_train) {
  const json j = {{"tool", kToolName},
                  {"version", kToolVersion},
                  {"seed", config.seed},
                  {"views_per_side", run.views_per_side},
                  {"n_train_samples", n_train},
                  {"n_test", run.ranking.n},
                  {"pearson_r", optional_json(run.ranking.pearson_r)},
                  {"spearman_rho", optional_json(run.ranking.spearman_rho)},
                  {"correlation_error", run.ranking.correlation_error},
                  {"cutoffs", cutoffs_json(run.ranking)},
                  {"scatter", "scatter.svg"}};
  return j.dump(2) + "\n";
}

namespace {

template <typename F>
auto run_stage(const char* name, std::ostream* log, F&& body) {
  if (log != nullptr) *log << "[" << name << "]\n";
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + name + ": " + e.what());
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::IoFailure, std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

std::vector<PipelineRun> run_pipeline(const PipelineConfig& config, const fs::path& out_dir,
                                      std::ostream* log) {
  run_stage("config", nullptr, [&] { config.validate(); });
  FieldConfig fc = config.field;
  fc.seed = config.seed;
  const DatasetPaths data{out_dir / "data"};
  run_stage("simulate", log, [&] {
    ensure_dir(out_dir);
    write_text_file((out_dir / "config.json").string(), pipeline_config_to_json(config) + "\n");
    return stage_simulate(fc, config.noise, data.dir);
  });

  FeaturizeInputs inputs;
  inputs.metadata = data.metadata();
  for (Side side : fc.sides) inputs.detections[side] = data.detections(side);
  if (config.use_tracking) {
    run_stage("track", log, [&] {
      ensure_dir(out_dir / "tracks");
      for (Side side : fc.sides) {
        const std::string s(to_string(side));
        const fs::path records = out_dir / "tracks" / ("tracks_" + s + ".jsonl");
        stage_track(data.detections(side), config.tracker, records,
                    out_dir / "tracks" / ("tracks_" + s + ".csv"));
        inputs.tracks[side] = records;
      }
    });
  }

  std::vector<PipelineRun> runs;
  json all = json::array();
  for (int v : config.views_per_side) {
    PipelineRun run;
    run.views_per_side = v;
    run.dir = out_dir / ("views_" + std::to_string(v));
    FeaturizeOptions fo;
    fo.views_per_side = v;
    fo.grid = config.grid;
    fo.image = {fc.image_width, fc.image_height};
    fo.augmentation = config.augmentation;
    fo.test_fraction = config.test_fraction;
    fo.seed = config.seed;
    run_stage("featurize", log, [&] { stage_featurize(inputs, fo, run.dir); });
    const auto samples_csv = run.dir / "samples.csv";
    run_stage("train", log, [&] {
      return stage_train(samples_csv, network_for(config, v), run.dir / "model.ckpt",
                         run.dir / "train_log.csv");
    });
    run_stage("predict", log, [&] {
      stage_predict(run.dir / "model.ckpt", samples_csv, run.dir / "predictions.csv");
    });
    run.ranking = run_stage("rank", log, [&] {
      return stage_rank(run.dir / "predictions.csv", config.cutoffs,
                        "views_per_side=" + std::to_string(v), run.dir);
    });
    const auto samples = read_samples(samples_csv);
    const auto n_train = static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.train; }));
    const std::string summary = summary_json(config, run, n_train);
    write_text_file((run.dir / "summary.json").string(), summary);
    all.push_back(json::parse(summary));
    runs.push_back(std::move(run));
  }

  const json top = {{"tool", kToolName}, {"version", kToolVersion},
                    {"seed", config.seed}, {"runs", all}};
  write_text_file((out_dir / "summary.json").string(), top.dump(2) + "\n");

  if (runs.size() > 1) {
    std::ostringstream cmp;
    cmp << "views_per_side,n_test,pearson_r,spearman_rho";
    for (double c : config.cutoffs) {
      const std::string p = format_double(round_decimals(c * 100.0, 6));
      cmp << ",accuracy_top" << p << ",sensitivity_top" << p << ",specificity_top" << p;
    }
    cmp << '\n';
    for (const auto& r : runs) {
      cmp << r.views_per_side << ',' << r.ranking.n << ','
          << (r.ranking.pearson_r ? format_double(*r.ranking.pearson_r) : "") << ','
          << (r.ranking.spearman_rho ? format_double(*r.ranking.spearman_rho) : "");
      for (const auto& c : r.ranking.cutoffs) {
        cmp << ',' << format_double(c.metrics.accuracy) << ','
            << format_double(c.metrics.sensitivity) << ','
            << format_double(c.metrics.specificity);
      }
      cmp << '\n';
    }
    write_text_file((out_dir / "comparison.csv").string(), cmp.str());
  }
  return runs;
}

}  // namespace podcount
