#include "podcount/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "podcount/error.hpp"
#include "podcount/rng.hpp"

namespace podcount {

using nlohmann::json;

namespace {

constexpr double kPodSizeMin = 10.0;
constexpr double kPodSizeMax = 24.0;
constexpr std::uint64_t kFieldStream = 0x6669656c64ULL;  // "field"

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

// Left edge of the camera window at frame 0: one image width before the
// first plot, so the pass starts on bare ground.
double pass_start(const FieldConfig& c) { return -c.image_width; }

double window_left(const FieldConfig& c, std::int64_t frame) {
  return pass_start(c) + static_cast<double>(frame) * c.pass_speed;
}

// First frame whose window centre is at or past world position x.
std::int64_t first_frame_at(const FieldConfig& c, double x) {
  return static_cast<std::int64_t>(
      std::ceil((x - pass_start(c) - c.image_width / 2.0) / c.pass_speed));
}

// Rendered coordinates are kept to 0.01 px and scores to 1e-4, which keeps
// detection files compact and their text form exact.
double quantize(double v, double scale) { return std::round(v * scale) / scale; }

std::optional<BoundingBox> clip_to_image(double x, double y, double w, double h,
                                         double width, double height) {
  const double x0 = quantize(std::max(x, 0.0), 100.0);
  const double y0 = quantize(std::max(y, 0.0), 100.0);
  const double bw = quantize(std::min(x + w, width) - x0, 100.0);
  const double bh = quantize(std::min(y + h, height) - y0, 100.0);
  if (!(bw > 0.0) || !(bh > 0.0)) return std::nullopt;
  return BoundingBox(x0, y0, bw, bh);
}

std::size_t side_index(Side s) { return static_cast<std::size_t>(s); }

std::uint64_t frame_seed(std::uint64_t seed, Side side, std::int64_t frame) {
  const std::uint64_t s = splitmix64(seed + 0x9E3779B97F4A7C15ULL * (side_index(side) + 1));
  return splitmix64(s ^ static_cast<std::uint64_t>(frame));
}

}  // namespace

void FieldConfig::validate() const {
  if (!std::isfinite(pod_mean) || !(std::isfinite(pod_std) && pod_std >= 0.0)) {
    invalid("pod count distribution must be finite");
  }
  if (pod_min < 0 || pod_min > pod_max) invalid("pod count range is empty");
  if (pod_std == 0.0) {
    const auto m = std::llround(pod_mean);
    if (m < pod_min || m > pod_max) invalid("pod mean lies outside the count range");
  }
  if (!finite_positive(plot_length) || !(std::isfinite(plot_spacing) && plot_spacing >= 0.0)) {
    invalid("plot length must be positive and spacing non-negative");
  }
  if (!finite_positive(image_width) || !finite_positive(image_height)) {
    invalid("image size must be positive");
  }
  if (!finite_positive(plot_height) || !(std::isfinite(plot_top) && plot_top >= 0.0) ||
      plot_top + plot_height > image_height || plot_height < kPodSizeMax) {
    invalid("plot rows must fit inside the image and hold a pod");
  }
  if (plot_length < kPodSizeMax) invalid("plot length must hold a pod");
  if (!finite_positive(pass_speed)) invalid("pass speed must be positive");
  if (frames_per_plot_min < 1 || frames_per_plot_min > frames_per_plot_max) {
    invalid("frames-per-plot range is empty");
  }
  if (plants_per_plot == 0) invalid("plants_per_plot must be positive");
  if (!(plot_visibility > 0.0 && plot_visibility <= 1.0)) {
    invalid("plot_visibility must lie in (0, 1]");
  }
  if (plot_length * plot_visibility > image_width) {
    invalid("plots can never be visible enough in one image");
  }
  if (sides.empty()) invalid("at least one side is required");
  for (std::size_t i = 0; i < sides.size(); ++i) {
    for (std::size_t j = i + 1; j < sides.size(); ++j) {
      if (sides[i] == sides[j]) invalid("duplicate side " + std::string(to_string(sides[i])));
    }
  }
}

void NoiseModel::validate() const {
  auto prob = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!prob(miss_rate)) invalid("miss_rate must lie in [0, 1]");
  if (!(std::isfinite(false_positive_rate) && false_positive_rate >= 0.0)) {
    invalid("false_positive_rate must be non-negative");
  }
  if (!(std::isfinite(jitter_std) && jitter_std >= 0.0)) invalid("jitter_std must be non-negative");
  if (!std::isfinite(score_alpha) || !std::isfinite(score_beta)) invalid("score shape must be finite");
  if (!prob(occlusion_base)) invalid("occlusion_base must lie in [0, 1]");
  if (!std::isfinite(occlusion_angle_slope)) invalid("occlusion slope must be finite");
}

double NoiseModel::occlusion_at(double angle_rad) const noexcept {
  const double p = occlusion_base +
                   occlusion_angle_slope * std::abs(angle_rad) / (std::numbers::pi / 2.0);
  return std::clamp(p, 0.0, 1.0);
}

SyntheticField generate_field(const FieldConfig& config) {
  config.validate();
  SyntheticField field;
  field.config = config;
  Rng rng(config.seed ^ kFieldStream);

  const double pitch = config.pitch();
  const double plant_step = config.plot_length / static_cast<double>(config.plants_per_plot);
  const int id_width = std::max(3, static_cast<int>(std::to_string(config.n_plots).size()));

  for (std::size_t i = 0; i < config.n_plots; ++i) {
    SyntheticPlot plot;
    char id[32];
    std::snprintf(id, sizeof id, "P%0*zu", id_width, i + 1);
    plot.plot_id = id;
    plot.x0 = static_cast<double>(i) * pitch;
    plot.x1 = plot.x0 + config.plot_length;

    std::int64_t count = 0;
    do {
      count = std::llround(rng.normal(config.pod_mean, config.pod_std));
    } while (count < config.pod_min || count > config.pod_max);
    plot.true_pod_count = count;

    std::vector<double> weights;
    double total_weight = 0.0;
    for (std::size_t k = 0; k < config.plants_per_plot; ++k) {
      plot.plant_x.push_back(plot.x0 + (static_cast<double>(k) + 0.5) * plant_step +
                             rng.uniform(-0.2, 0.2) * plant_step);
      weights.push_back(0.5 + rng.uniform());
      total_weight += weights.back();
    }

    plot.pods.reserve(static_cast<std::size_t>(count));
    for (std::int64_t p = 0; p < count; ++p) {
      double pick = rng.uniform() * total_weight;
      std::size_t plant = 0;
      while (plant + 1 < weights.size() && pick >= weights[plant]) {
        pick -= weights[plant];
        ++plant;
      }
      SyntheticPod pod;
      pod.plant = plant;
      pod.w = rng.uniform(kPodSizeMin, kPodSizeMax);
      pod.h = rng.uniform(kPodSizeMin, kPodSizeMax);
      const double cx = std::clamp(rng.normal(plot.plant_x[plant], 0.3 * plant_step),
                                   plot.x0 + pod.w / 2.0, plot.x1 - pod.w / 2.0);
      const double cy = rng.uniform(config.plot_top + pod.h / 2.0,
                                    config.plot_top + config.plot_height - pod.h / 2.0);
      pod.x = cx - pod.w / 2.0;
      pod.y = cy - pod.h / 2.0;
      plot.pods.push_back(pod);
    }
    field.plots.push_back(std::move(plot));
  }

  // Expert ranges split the pass at the mid-points between plots, so the
  // ranges of one side are contiguous and never overlap.
  auto boundary = [&](std::size_t i) {
    return static_cast<double>(i) * pitch - config.plot_spacing / 2.0;
  };
  std::int64_t last_frame = 0;
  for (std::size_t i = 0; i < field.plots.size(); ++i) {
    const std::int64_t start = first_frame_at(config, boundary(i));
    const std::int64_t end = first_frame_at(config, boundary(i + 1)) - 1;
    const std::int64_t n = end - start + 1;
    if (n < config.frames_per_plot_min || n > config.frames_per_plot_max) {
      invalid("a plot spans " + std::to_string(n) + " frames, outside [" +
              std::to_string(config.frames_per_plot_min) + ", " +
              std::to_string(config.frames_per_plot_max) + "]");
    }
    last_frame = std::max(last_frame, end);
    for (Side side : config.sides) {
      field.plot_meta.push_back(
          {field.plots[i].plot_id, side, start, end, field.plots[i].true_pod_count});
    }
  }
  if (field.plots.empty()) return field;
  const auto through = static_cast<std::int64_t>(std::floor(
                           (field.plots.back().x1 - pass_start(config)) / config.pass_speed)) + 1;
  field.frames_per_pass = std::max(through, last_frame + 1);
  return field;
}

PassRender render_pass(const SyntheticField& field, Side side, const NoiseModel& noise,
                       const RenderOptions& options) {
  noise.validate();
  const FieldConfig& c = field.config;
  if (std::find(c.sides.begin(), c.sides.end(), side) == c.sides.end()) {
    throw Error(ErrorCode::MissingSide,
                "field has no side " + std::string(to_string(side)));
  }
  const bool mirror = side == Side::B;
  const bool scored = noise.score_alpha > 0.0 && noise.score_beta > 0.0;
  const bool occluding = noise.occlusion_base > 0.0 || noise.occlusion_angle_slope > 0.0;
  const double W = c.image_width;
  const double H = c.image_height;
  const double camera_depth = W / 2.0;

  PassRender out;
  out.noisy.reserve(static_cast<std::size_t>(field.frames_per_pass));
  out.truth.reserve(static_cast<std::size_t>(field.frames_per_pass));

  std::vector<char> occluded;
  for (std::int64_t f = 0; f < field.frames_per_pass; ++f) {
    Rng rng(frame_seed(c.seed, side, f));
    const double left = window_left(c, f);
    const double right = left + W;
    FrameRecord noisy{f, {}};
    FrameRecord truth{f, {}};

    auto score = [&]() -> double {
      return scored ? quantize(rng.beta(noise.score_alpha, noise.score_beta), 1e4) : 1.0;
    };
    auto flip_y = [&](double y, double h) { return mirror ? H - y - h : y; };
    std::vector<std::int64_t> sources;
    auto emit = [&](double x, double y, double w, double h, std::string_view label,
                    std::int64_t source) {
      double nx = x, ny = y;
      if (noise.jitter_std > 0.0) {
        nx += rng.normal(0.0, noise.jitter_std);
        ny += rng.normal(0.0, noise.jitter_std);
      }
      const double s = score();
      if (auto box = clip_to_image(nx, ny, w, h, W, H)) {
        noisy.detections.push_back({*box, s, std::string(label)});
        sources.push_back(source);
      }
    };
    auto truth_index = [&]() { return static_cast<std::int64_t>(truth.detections.size()) - 1; };

    // Plots overlapping the window.
    std::size_t first = field.plots.size(), last = 0;
    for (std::size_t i = 0; i < field.plots.size(); ++i) {
      const auto& plot = field.plots[i];
      if (plot.x1 <= left || plot.x0 >= right) continue;
      first = std::min(first, i);
      last = i;
      const double vx0 = std::max(plot.x0, left);
      const double visible = std::min(plot.x1, right) - vx0;
      if (visible < c.plot_visibility * c.plot_length) continue;
      const double y = flip_y(c.plot_top, c.plot_height);
      auto box = clip_to_image(vx0 - left, y, visible, c.plot_height, W, H);
      if (!box) continue;
      truth.detections.push_back({*box, std::nullopt, std::string(kPlotLabel)});
      emit(vx0 - left, y, visible, c.plot_height, kPlotLabel, truth_index());
    }

    const bool want_pods =
        options.pods && (!options.pod_frames || options.pod_frames->contains(f));
    if (want_pods && first < field.plots.size()) {
      for (std::size_t i = first; i <= last; ++i) {
        const auto& plot = field.plots[i];
        occluded.assign(plot.plant_x.size(), 0);
        if (occluding) {
          for (std::size_t k = 0; k < plot.plant_x.size(); ++k) {
            const double angle = std::atan2(plot.plant_x[k] - (left + W / 2.0), camera_depth);
            occluded[k] = rng.bernoulli(noise.occlusion_at(angle)) ? 1 : 0;
          }
        }
        for (const auto& pod : plot.pods) {
          const double cx = pod.x + pod.w / 2.0;
          if (cx < left || cx >= right) continue;
          const double y = flip_y(pod.y, pod.h);
          auto box = clip_to_image(pod.x - left, y, pod.w, pod.h, W, H);
          if (!box) continue;
          truth.detections.push_back({*box, std::nullopt, std::string(kPodLabel)});
          if (occluded[pod.plant] != 0) continue;
          if (rng.bernoulli(noise.miss_rate)) continue;
          emit(pod.x - left, y, pod.w, pod.h, kPodLabel, truth_index());
        }
      }
    }
    if (want_pods) {
      const auto n_fp = rng.poisson(noise.false_positive_rate);
      for (std::uint64_t k = 0; k < n_fp; ++k) {
        const double w = rng.uniform(kPodSizeMin, kPodSizeMax);
        const double h = rng.uniform(kPodSizeMin, kPodSizeMax);
        const double x = rng.uniform(0.0, W - w);
        const double y = rng.uniform(0.0, H - h);
        const double s = score();
        if (auto box = clip_to_image(x, y, w, h, W, H)) {
          noisy.detections.push_back({*box, s, std::string(kPodLabel)});
          sources.push_back(-1);
        }
      }
    }
    out.noisy.push_back(std::move(noisy));
    out.sources.push_back(std::move(sources));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

TruthExport export_truth(const SyntheticField& field) {
  TruthExport out;
  std::ostringstream meta;
  write_plot_meta(meta, field.plot_meta);
  out.plot_meta_csv = meta.str();

  AnnotationSet set;
  for (const auto& plot : field.plots) {
    auto& boxes = set.images[plot.plot_id + ".jpg"];
    boxes.reserve(plot.pods.size());
    for (const auto& pod : plot.pods) {
      boxes.push_back({BoundingBox(pod.x - plot.x0, pod.y, pod.w, pod.h), std::nullopt,
                       std::string(kPodLabel)});
    }
  }
  out.annotations_json = serialize_annotations(set);
  return out;
}

std::string field_config_to_json(const FieldConfig& c) {
  json sides = json::array();
  for (Side s : c.sides) sides.push_back(std::string(to_string(s)));
  const json j = {{"n_plots", c.n_plots},
                  {"pod_mean", c.pod_mean},
                  {"pod_std", c.pod_std},
                  {"pod_min", c.pod_min},
                  {"pod_max", c.pod_max},
                  {"plot_length", c.plot_length},
                  {"plot_spacing", c.plot_spacing},
                  {"plot_top", c.plot_top},
                  {"plot_height", c.plot_height},
                  {"pass_speed", c.pass_speed},
                  {"frames_per_plot_min", c.frames_per_plot_min},
                  {"frames_per_plot_max", c.frames_per_plot_max},
                  {"image_width", c.image_width},
                  {"image_height", c.image_height},
                  {"plants_per_plot", c.plants_per_plot},
                  {"plot_visibility", c.plot_visibility},
                  {"sides", sides},
                  {"seed", c.seed}};
  return j.dump();
}

FieldConfig field_config_from_json(std::string_view text) {
  FieldConfig c;
  try {
    const json j = json::parse(text);
    c.n_plots = j.value("n_plots", c.n_plots);
    c.pod_mean = j.value("pod_mean", c.pod_mean);
    c.pod_std = j.value("pod_std", c.pod_std);
    c.pod_min = j.value("pod_min", c.pod_min);
    c.pod_max = j.value("pod_max", c.pod_max);
    c.plot_length = j.value("plot_length", c.plot_length);
    c.plot_spacing = j.value("plot_spacing", c.plot_spacing);
    c.plot_top = j.value("plot_top", c.plot_top);
    c.plot_height = j.value("plot_height", c.plot_height);
    c.pass_speed = j.value("pass_speed", c.pass_speed);
    c.frames_per_plot_min = j.value("frames_per_plot_min", c.frames_per_plot_min);
    c.frames_per_plot_max = j.value("frames_per_plot_max", c.frames_per_plot_max);
    c.image_width = j.value("image_width", c.image_width);
    c.image_height = j.value("image_height", c.image_height);
    c.plants_per_plot = j.value("plants_per_plot", c.plants_per_plot);
    c.plot_visibility = j.value("plot_visibility", c.plot_visibility);
    if (j.contains("sides")) {
      c.sides.clear();
      for (const auto& s : j.at("sides")) c.sides.push_back(parse_side(s.get<std::string>()));
    }
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    invalid(std::string("field config: ") + e.what());
  } catch (const Error& e) {
    invalid(std::string("field config: ") + e.what());
  }
  return c;
}

std::string noise_model_to_json(const NoiseModel& n) {
  const json j = {{"miss_rate", n.miss_rate},
                  {"false_positive_rate", n.false_positive_rate},
                  {"jitter_std", n.jitter_std},
                  {"score_alpha", n.score_alpha},
                  {"score_beta", n.score_beta},
                  {"occlusion_base", n.occlusion_base},
                  {"occlusion_angle_slope", n.occlusion_angle_slope}};
  return j.dump();
}

NoiseModel noise_model_from_json(std::string_view text) {
  NoiseModel n;
  try {
    const json j = json::parse(text);
    n.miss_rate = j.value("miss_rate", n.miss_rate);
    n.false_positive_rate = j.value("false_positive_rate", n.false_positive_rate);
    n.jitter_std = j.value("jitter_std", n.jitter_std);
    n.score_alpha = j.value("score_alpha", n.score_alpha);
    n.score_beta = j.value("score_beta", n.score_beta);
    n.occlusion_base = j.value("occlusion_base", n.occlusion_base);
    n.occlusion_angle_slope = j.value("occlusion_angle_slope", n.occlusion_angle_slope);
  } catch (const json::exception& e) {
    invalid(std::string("noise model: ") + e.what());
  }
  return n;
}

NoiseModel default_field_noise() {
  NoiseModel n;
  n.miss_rate = 0.1;
  n.false_positive_rate = 2.0;
  n.jitter_std = 2.0;
  n.score_alpha = 8.0;
  n.score_beta = 2.0;
  n.occlusion_base = 0.4;
  return n;
}

}  // namespace podcount
