// podcount: synthetic-field pod counting pipeline.
//
// Machine-readable results go to files under --out-dir; progress and
// diagnostics go to stderr. Exit status: 0 success, 1 usage error, 2 data
// error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "podcount/data_model.hpp"
#include "podcount/det_eval.hpp"
#include "podcount/error.hpp"
#include "podcount/pipeline.hpp"

namespace fs = std::filesystem;
using namespace podcount;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir{"."};
  bool quiet{false};
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ostream& log_stream(const Globals& g) {
  static std::ostream null_stream(nullptr);
  return g.quiet ? null_stream : std::cerr;
}

PipelineConfig load_config(const Globals& g) {
  PipelineConfig c;
  if (!g.config_path.empty()) c = pipeline_config_from_json(read_text_file(g.config_path));
  if (g.seed) c.seed = *g.seed;
  c.field.seed = c.seed;
  return c;
}

fs::path out_dir(const Globals& g) {
  const fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw UsageError("not an integer list: '" + text + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view pod counting on synthetic field passes", "podcount"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config (JSON)");
  app.add_option("--seed", g.seed, "Seed for every random draw");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");
  app.set_version_flag("--version", std::string(kToolVersion));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic field dataset");
  std::optional<std::size_t> sim_plots;
  bool noise_free = false;
  sim->add_option("--n-plots", sim_plots, "Number of plots");
  sim->add_flag("--noise-free", noise_free, "Render detections without detector noise");

  // track
  auto* trk = app.add_subcommand("track", "Track detections through a pass");
  std::string trk_detections, trk_label{kPlotLabel};
  std::optional<int> trk_expiry;
  std::optional<double> trk_distance;
  trk->add_option("--detections", trk_detections, "Detections file")->required();
  trk->add_option("--label", trk_label, "Label to track; empty tracks everything")
      ->capture_default_str();
  trk->add_option("--expiry", trk_expiry, "Missed frames before a track expires");
  trk->add_option("--max-distance", trk_distance, "Largest matchable centroid distance");

  // eval-det
  auto* ev = app.add_subcommand("eval-det", "Average precision of detections");
  std::string ev_pred, ev_gt;
  double ev_iou = 0.55;
  bool ev_eleven = false;
  ev->add_option("--predictions", ev_pred, "Scored detections file")->required();
  ev->add_option("--ground-truth", ev_gt, "Ground-truth detections file")->required();
  ev->add_option("--iou", ev_iou, "IoU threshold")->capture_default_str();
  ev->add_flag("--eleven-point", ev_eleven, "11-point interpolated AP");

  // featurize
  auto* fz = app.add_subcommand("featurize", "Select views and build feature grids");
  std::string fz_data, fz_tracks;
  std::optional<int> fz_views;
  fz->add_option("--data-dir", fz_data, "Dataset directory from simulate")->required();
  fz->add_option("--tracks-dir", fz_tracks, "Directory with tracks_<SIDE>.jsonl files");
  fz->add_option("--views", fz_views, "Views per side");

  // train
  auto* tr = app.add_subcommand("train", "Train the count regressor");
  std::string tr_samples;
  std::optional<std::size_t> tr_epochs;
  tr->add_option("--samples", tr_samples, "samples.csv from featurize")->required();
  tr->add_option("--epochs", tr_epochs, "Training epochs");

  // predict
  auto* pr = app.add_subcommand("predict", "Predict pod counts of test plots");
  std::string pr_model, pr_samples;
  pr->add_option("--model", pr_model, "Model checkpoint")->required();
  pr->add_option("--samples", pr_samples, "samples.csv from featurize")->required();

  // rank
  auto* rk = app.add_subcommand("rank", "Correlation and top-fraction selection metrics");
  std::string rk_pred, rk_counts, rk_label{"model"};
  std::vector<double> rk_cutoffs;
  int rk_decimals = 4;
  auto* rk_pred_opt = rk->add_option("--predictions", rk_pred, "predictions.csv");
  auto* rk_counts_opt =
      rk->add_option("--counts", rk_counts, "Confusion counts: model,cutoff,tp,tn,fp,fn");
  rk_pred_opt->excludes(rk_counts_opt);
  rk->add_option("--cutoffs", rk_cutoffs, "Selection fractions")->delimiter(',');
  rk->add_option("--label", rk_label, "Model column label")->capture_default_str();
  rk->add_option("--decimals", rk_decimals, "Digits for metric values")->capture_default_str();

  // stats
  auto* st = app.add_subcommand("stats", "Summary statistics of pod counts");
  std::string st_counts;
  st->add_option("--counts", st_counts, "Counts list or plot metadata table")->required();

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "Run every stage end to end");
  std::string pl_views;
  std::optional<std::size_t> pl_plots;
  pl->add_option("--views", pl_views, "Views per side, comma separated (e.g. 1,3)");
  pl->add_option("--n-plots", pl_plots, "Number of plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::ostream& log = log_stream(g);
  try {
    PipelineConfig cfg = load_config(g);

    if (sim->parsed()) {
      if (sim_plots) cfg.field.n_plots = *sim_plots;
      const NoiseModel noise = noise_free ? NoiseModel{} : cfg.noise;
      const auto dir = out_dir(g);
      const std::string hash = stage_simulate(cfg.field, noise, dir);
      log << "wrote dataset to " << dir.string() << " (manifest " << hash << ")\n";
    } else if (trk->parsed()) {
      TrackerConfig tc = cfg.tracker;
      if (trk_expiry) tc.expiry_frames = *trk_expiry;
      if (trk_distance) tc.max_match_distance = *trk_distance;
      const auto dir = out_dir(g);
      stage_track(trk_detections, tc, dir / "tracks.jsonl", dir / "tracks.csv", trk_label);
      log << "wrote " << (dir / "tracks.jsonl").string() << " and tracks.csv\n";
    } else if (ev->parsed()) {
      const auto preds = read_detections_file(ev_pred);
      const auto gt = read_detections_file(ev_gt);
      const auto report = evaluate_frames(
          preds, gt, ev_iou, ev_eleven ? Interpolation::ElevenPoint : Interpolation::AllPoint);
      const auto dir = out_dir(g);
      const std::vector<fs::path> inputs{ev_pred, ev_gt};
      write_text_file((dir / "eval.csv").string(),
                      provenance_header(inputs) + format_evaluation_report(report));
      log << "mAP@" << ev_iou << " = " << report.map << '\n';
    } else if (fz->parsed()) {
      const DatasetPaths data{fz_data};
      const DatasetInfo info = read_dataset_info(data.dir);
      FeaturizeInputs in;
      in.metadata = data.metadata();
      for (Side s : info.sides) {
        in.detections[s] = data.detections(s);
        if (!fz_tracks.empty()) {
          in.tracks[s] = fs::path(fz_tracks) / ("tracks_" + std::string(to_string(s)) + ".jsonl");
        }
      }
      FeaturizeOptions fo;
      fo.views_per_side = fz_views.value_or(cfg.views_per_side.front());
      fo.grid = cfg.grid;
      fo.image = info.image;
      fo.augmentation = cfg.augmentation;
      fo.test_fraction = cfg.test_fraction;
      fo.seed = cfg.seed;
      const auto dir = out_dir(g);
      stage_featurize(in, fo, dir);
      log << "wrote " << (dir / "samples.csv").string() << '\n';
    } else if (tr->parsed()) {
      NetworkConfig nc = cfg.network;
      nc.seed = cfg.seed;
      if (tr_epochs) nc.epochs = *tr_epochs;
      const auto dir = out_dir(g);
      const auto report = stage_train(tr_samples, nc, dir / "model.ckpt", dir / "train_log.csv");
      log << "trained " << report.epoch_losses.size() << " epochs, final loss "
          << report.final_training_loss << '\n';
    } else if (pr->parsed()) {
      const auto dir = out_dir(g);
      stage_predict(pr_model, pr_samples, dir / "predictions.csv");
      log << "wrote " << (dir / "predictions.csv").string() << '\n';
    } else if (rk->parsed()) {
      const std::vector<double> cutoffs = rk_cutoffs.empty() ? cfg.cutoffs : rk_cutoffs;
      const auto dir = out_dir(g);
      if (!rk_counts.empty()) {
        const auto columns = parse_confusion_table(read_text_file(rk_counts));
        const std::vector<fs::path> inputs{rk_counts};
        write_text_file((dir / "ranking.csv").string(),
                        provenance_header(inputs) + format_ranking_table(columns, rk_decimals));
      } else if (!rk_pred.empty()) {
        const auto report = stage_rank(rk_pred, cutoffs, rk_label, dir);
        if (report.pearson_r) log << "pearson r = " << *report.pearson_r << '\n';
      } else {
        throw UsageError("rank needs --predictions or --counts");
      }
      log << "wrote " << (dir / "ranking.csv").string() << '\n';
    } else if (st->parsed()) {
      std::ifstream in(st_counts);
      if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + st_counts + "'");
      const auto counts = parse_counts(in);
      const auto stats = dataset_stats(counts);
      const auto dir = out_dir(g);
      const std::vector<fs::path> inputs{st_counts};
      write_text_file((dir / "stats.csv").string(),
                      provenance_header(inputs) + format_stats(stats));
      log << "n=" << stats.n << " mean=" << stats.mean << " sd=" << stats.std_sample << '\n';
    } else if (pl->parsed()) {
      if (!pl_views.empty()) cfg.views_per_side = parse_int_list(pl_views);
      if (pl_plots) cfg.field.n_plots = *pl_plots;
      const auto dir = out_dir(g);
      const auto runs = run_pipeline(cfg, dir, &log);
      for (const auto& r : runs) {
        log << "views/side " << r.views_per_side << ": pearson r = "
            << (r.ranking.pearson_r ? std::to_string(*r.ranking.pearson_r) : "n/a") << '\n';
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "podcount: usage error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "podcount: " << e.what() << '\n';
    return exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "podcount: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
