#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "podcount/data_model.hpp"
#include "podcount/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::path(PODCOUNT_TEST_TMP) / "cli";

struct Result {
  int status;
  std::string err;
};

Result run(const std::string& args) {
  fs::create_directories(kRoot);
  const fs::path err = kRoot / "stderr.txt";
  const std::string cmd = std::string(PODCOUNT_CLI) + " " + args + " 2> " + err.string() + " > " +
                          (kRoot / "stdout.txt").string();
  const int raw = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, s.str()};
}

fs::path fresh(const std::string& name) {
  const fs::path p = kRoot / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) { return podcount::read_text_file(p.string()); }

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run("--help").status == 0);
  CHECK(run("").status == 1);
  CHECK(run("no-such-command").status == 1);
  CHECK(run("track").status == 1);
  const auto both = run("rank --predictions a.csv --counts b.csv");
  CHECK(both.status == 1);
}

TEST_CASE("simulate writes a dataset deterministically") {
  const auto a = fresh("sim_a");
  const auto b = fresh("sim_b");
  REQUIRE(run("--seed 4 --quiet --out-dir " + a.string() + " simulate --n-plots 5").status == 0);
  REQUIRE(run("--seed 4 --quiet --out-dir " + b.string() + " simulate --n-plots 5").status == 0);
  for (const char* f : {"detections_A.jsonl", "detections_B.jsonl", "metadata.csv",
                        "annotations.json", "manifest.json", "provenance.json", "scenario.json"}) {
    CHECK_MESSAGE(fs::exists(a / f), f);
  }
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK(podcount::read_plot_meta_file((a / "metadata.csv").string()).size() == 10);

  const auto c = fresh("sim_c");
  REQUIRE(run("--seed 5 --quiet --out-dir " + c.string() + " simulate --n-plots 5").status == 0);
  CHECK(slurp(a / "manifest.json") != slurp(c / "manifest.json"));
}

TEST_CASE("an unwritable output path fails with a diagnostic") {
  const auto blocker = fresh("blocker");
  fs::create_directories(kRoot);
  std::ofstream(blocker) << "file";
  const auto r = run("--out-dir " + (blocker / "sub").string() + " simulate --n-plots 2");
  CHECK(r.status != 0);
  CHECK(r.err.find("podcount:") != std::string::npos);
}

TEST_CASE("missing input files are data errors") {
  const auto r = run("--out-dir " + fresh("missing").string() + " stats --counts /nonexistent/x.txt");
  CHECK(r.status == 2);
  CHECK(r.err.find("IoFailure") != std::string::npos);
}

TEST_CASE("eval-det scores a perfect detector 1") {
  const auto data = fresh("perfect");
  REQUIRE(run("--quiet --out-dir " + data.string() + " simulate --n-plots 2 --noise-free").status == 0);
  const auto out = fresh("perfect_eval");
  REQUIRE(run("--quiet --out-dir " + out.string() + " eval-det --predictions " +
              (data / "detections_A.jsonl").string() + " --ground-truth " +
              (data / "truth_A.jsonl").string())
              .status == 0);
  const auto text = slurp(out / "eval.csv");
  CHECK(text.find(",mAP,57820,57820,1\n") != std::string::npos);
}

TEST_CASE("rank reproduces the study's table from its counts") {
  const auto dir = fresh("table3");
  fs::create_directories(dir);
  std::ofstream(dir / "counts.csv") << "model,cutoff,tp,tn,fp,fn\n"
                                       "1-img control,0.2,7,37,3,4\n"
                                       "1-img control,0.3,12,33,3,3\n"
                                       "3-imgs control,0.2,7,37,3,4\n"
                                       "3-imgs control,0.3,10,31,5,5\n"
                                       "1-img in-field,0.2,3,31,5,5\n"
                                       "1-img in-field,0.3,8,26,5,5\n"
                                       "3-imgs in-field,0.2,3,31,5,5\n"
                                       "3-imgs in-field,0.3,9,27,4,4\n";
  REQUIRE(run("--quiet --out-dir " + dir.string() + " rank --counts " +
              (dir / "counts.csv").string() + " --decimals 2")
              .status == 0);
  const auto text = slurp(dir / "ranking.csv");
  CHECK(text.find("Accuracy,0.86,0.88,0.86,0.80,0.77,0.77,0.77,0.82") != std::string::npos);
  CHECK(text.find("Sensitivity,0.64,0.80,0.64,0.67,0.38,0.62,0.38,0.69") != std::string::npos);
  CHECK(text.find("Specificity,0.93,0.92,0.93,0.86,0.86,0.84,0.86,0.87") != std::string::npos);
}

TEST_CASE("stats of a counts file") {
  const auto dir = fresh("stats");
  fs::create_directories(dir);
  std::ofstream(dir / "c.txt") << "1\n2\n3\n";
  REQUIRE(run("--quiet --out-dir " + dir.string() + " stats --counts " + (dir / "c.txt").string())
              .status == 0);
  CHECK(slurp(dir / "stats.csv").find("\nmean,2\n") != std::string::npos);
}

TEST_CASE("stage subcommands chain and match the pipeline") {
  const auto root = fresh("stages");
  fs::create_directories(root);
  std::ofstream(root / "config.json")
      << R"({"field": {"n_plots": 12}, "test_fraction": 0.5, "views_per_side": [1],
             "augmentation": {"factor": 2, "shift": 2}, "network": {"epochs": 2, "batch_size": 8}})";
  const std::string g = "--quiet --seed 3 --config " + (root / "config.json").string();
  const auto cmd = [&](const std::string& dir, const std::string& rest) {
    return run(g + " --out-dir " + (root / dir).string() + " " + rest).status;
  };
  REQUIRE(cmd("data", "simulate") == 0);
  fs::create_directories(root / "tracks");
  for (const char* s : {"A", "B"}) {
    REQUIRE(cmd("trk_" + std::string(s),
                "track --detections " + (root / "data" / ("detections_" + std::string(s) + ".jsonl")).string()) == 0);
    fs::copy_file(root / ("trk_" + std::string(s)) / "tracks.jsonl",
                  root / "tracks" / ("tracks_" + std::string(s) + ".jsonl"));
  }
  REQUIRE(cmd("feat", "featurize --data-dir " + (root / "data").string() + " --tracks-dir " +
                          (root / "tracks").string()) == 0);
  REQUIRE(cmd("model", "train --samples " + (root / "feat" / "samples.csv").string()) == 0);
  REQUIRE(cmd("pred", "predict --model " + (root / "model" / "model.ckpt").string() +
                          " --samples " + (root / "feat" / "samples.csv").string()) == 0);
  REQUIRE(cmd("rank", "rank --predictions " + (root / "pred" / "predictions.csv").string() +
                          " --label views_per_side=1") == 0);

  REQUIRE(cmd("pipe", "pipeline") == 0);
  const auto v = root / "pipe" / "views_1";
  CHECK(slurp(root / "data" / "manifest.json") == slurp(root / "pipe" / "data" / "manifest.json"));
  CHECK(slurp(root / "pred" / "predictions.csv").substr(slurp(root / "pred" / "predictions.csv").find("plot_id")) ==
        slurp(v / "predictions.csv").substr(slurp(v / "predictions.csv").find("plot_id")));
  CHECK(podcount::hash_file_hex(root / "model" / "model.ckpt") ==
        podcount::hash_file_hex(v / "model.ckpt"));
  CHECK(slurp(root / "rank" / "correlation.csv").substr(slurp(root / "rank" / "correlation.csv").find("statistic")) ==
        slurp(v / "correlation.csv").substr(slurp(v / "correlation.csv").find("statistic")));

  // idempotent rerun
  const auto before = slurp(root / "pipe" / "summary.json");
  REQUIRE(cmd("pipe", "pipeline") == 0);
  CHECK(slurp(root / "pipe" / "summary.json") == before);
  CHECK(slurp(v / "summary.json").find("\"pearson_r\"") != std::string::npos);
}
