#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "podcount/error.hpp"
#include "podcount/regressor.hpp"

using namespace podcount;
namespace fs = std::filesystem;

namespace {

NetworkConfig small_config(std::size_t views = 2) {
  NetworkConfig c;
  c.views = views;
  c.input_channels = 3;
  c.input_height = 8;
  c.input_width = 8;
  c.conv_blocks = {{4, 3, true, true}, {4, 3, true, true}, {5, 3, false, false}};
  c.fc_sizes = {8, 4, 1};
  c.seed = 5;
  c.epochs = 10;
  c.batch_size = 4;
  return c;
}

FeatureGrid random_grid(Rng& rng, std::size_t c, std::size_t h, std::size_t w) {
  FeatureGrid g(c, h, w);
  for (auto& v : g.data()) v = static_cast<float>(rng.uniform(0, 2));
  return g;
}

std::vector<TrainSample> random_samples(Rng& rng, const NetworkConfig& c, std::size_t n) {
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    TrainSample s;
    double mass = 0;
    for (std::size_t v = 0; v < c.views; ++v) {
      s.views.push_back(random_grid(rng, c.input_channels, c.input_height, c.input_width));
      for (std::size_t y = 0; y < c.input_height; ++y)
        for (std::size_t x = 0; x < c.input_width; ++x) mass += s.views.back().at(0, y, x);
    }
    s.target = 200.0 + 3.0 * mass;
    out.push_back(std::move(s));
  }
  return out;
}

Tensor random_input(Rng& rng, const NetworkConfig& c) {
  return oracle::random_tensor(rng, {c.fused_channels(), c.input_height, c.input_width}, 0, 2);
}

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("fusing views") {
  Rng rng(81);
  const auto a = random_grid(rng, 3, 16, 16);
  const auto b = random_grid(rng, 3, 16, 16);
  const std::vector<FeatureGrid> one = {a};
  const auto t1 = fuse_views(one, 1);
  CHECK(t1.shape() == std::vector<std::size_t>{3, 16, 16});
  for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(t1[i] == a.data()[i]);

  const std::vector<FeatureGrid> two = {a, b};
  const auto t2 = fuse_views(two, 2);
  CHECK(t2.shape() == std::vector<std::size_t>{6, 16, 16});
  const std::size_t plane = 3 * 16 * 16;
  for (std::size_t i = 0; i < plane; ++i) {
    CHECK(t2[i] == a.data()[i]);
    CHECK(t2[plane + i] == b.data()[i]);
  }

  const std::vector<FeatureGrid> mixed = {a, random_grid(rng, 3, 8, 16)};
  CHECK(error_of([&] { fuse_views(mixed); }) == ErrorCode::ShapeMismatch);
  CHECK(error_of([&] { fuse_views(two, 3); }) == ErrorCode::WrongViewCount);
}

TEST_CASE("configuration validation") {
  auto c = small_config();
  c.conv_blocks.pop_back();
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
  c = small_config();
  c.fc_sizes = {8, 4, 2};
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
  c = small_config();
  c.conv_blocks[2].has_pool = true;
  CHECK(error_of([&] { c.validate(); }) == ErrorCode::InvalidConfig);
  c = small_config();
  CHECK(network_config_from_json(network_config_to_json(c)) == c);
}

TEST_CASE("a zero network outputs its final bias") {
  Network net(small_config());
  for (auto& p : net.mutable_parameters()) p.value.fill(0.0);
  net.parameter("fc3.bias").value[0] = 3.25;
  Rng rng(82);
  for (int i = 0; i < 5; ++i) {
    CHECK(net.forward(random_input(rng, net.config())) == 3.25);
  }
  std::vector<std::vector<FeatureGrid>> sets(3);
  for (auto& s : sets)
    for (int v = 0; v < 2; ++v) s.push_back(random_grid(rng, 3, 8, 8));
  for (double p : predict(net, sets)) CHECK(p == 3.25);
}

TEST_CASE("the output is linear in the last layer's weights") {
  Network net(small_config());
  Rng rng(83);
  const auto x = random_input(rng, net.config());
  const double y = net.forward(x);
  for (auto& v : net.parameter("fc3.weight").value.data()) v *= 2.0;
  CHECK(net.forward(x) == doctest::Approx(2.0 * y).epsilon(1e-12));
}

TEST_CASE("initialization and forward are deterministic") {
  Rng rng(84);
  const auto x = random_input(rng, small_config());
  Network a(small_config()), b(small_config());
  CHECK(a.forward(x) == b.forward(x));
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters()[i].value == b.parameters()[i].value);
  }
  auto other = small_config();
  other.seed = 6;
  CHECK(Network(other).forward(x) != a.forward(x));
}

TEST_CASE("wrong input shape") {
  Network net(small_config());
  CHECK(error_of([&] { (void)net.forward(Tensor({3, 8, 8})); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("full network gradient check") {
  for (std::size_t views : {1u, 2u}) {
    Network net(small_config(views));
    Rng rng(85 + views);
    std::vector<Tensor> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_input(rng, net.config()));
    const std::vector<double> lg = {0.7, -1.3, 0.4};
    // Non-trivial BN shifts and scales.
    for (auto& p : net.mutable_parameters()) {
      if (p.name.find(".gamma") != std::string::npos)
        for (auto& v : p.value.data()) v = rng.uniform(0.5, 1.5);
      if (p.name.find(".beta") != std::string::npos || p.name.find(".bias") != std::string::npos)
        for (auto& v : p.value.data()) v = rng.uniform(-0.2, 0.2);
    }
    const auto fwd = net.forward(batch, Mode::Train);
    const auto grads = net.backward(fwd.cache, lg);
    REQUIRE(grads.size() == net.parameters().size());
    for (std::size_t pi = 0; pi < grads.size(); ++pi) {
      auto loss = [&] {
        const auto out = net.forward(batch, Mode::Train).outputs;
        double s = 0;
        for (std::size_t i = 0; i < out.size(); ++i) s += lg[i] * out[i];
        return s;
      };
      Tensor& param = net.mutable_parameters()[pi].value;
      const auto numeric = oracle::numeric_gradient(param, loss);
      INFO(net.parameters()[pi].name);
      CHECK(oracle::max_relative_error(grads[pi].data(), numeric) < 1e-4);
    }
  }
}

TEST_CASE("zero loss gradient gives zero parameter gradients") {
  Network net(small_config());
  Rng rng(87);
  std::vector<Tensor> batch = {random_input(rng, net.config()), random_input(rng, net.config())};
  const auto fwd = net.forward(batch, Mode::Train);
  const std::vector<double> zero = {0.0, 0.0};
  for (const auto& g : net.backward(fwd.cache, zero))
    for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("a cache from older parameters is stale") {
  Network net(small_config());
  Rng rng(88);
  std::vector<Tensor> batch = {random_input(rng, net.config()), random_input(rng, net.config())};
  const auto fwd = net.forward(batch, Mode::Train);
  net.parameter("fc1.bias").value[0] += 1.0;
  const std::vector<double> lg = {1.0, 1.0};
  CHECK(error_of([&] { (void)net.backward(fwd.cache, lg); }) == ErrorCode::StaleCache);
  const auto infer = net.forward(batch, Mode::Infer);
  CHECK(error_of([&] { (void)net.backward(infer.cache, lg); }) == ErrorCode::StaleCache);
}

TEST_CASE("zero epochs leave the network untouched") {
  auto c = small_config();
  c.epochs = 0;
  Network net(c);
  const auto before = net.parameters();
  Rng rng(89);
  const auto samples = random_samples(rng, c, 4);
  const auto report = train(net, samples);
  CHECK(report.epoch_losses.empty());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(net.parameters()[i].value == before[i].value);
  CHECK(net.count_scale() == 1.0);
}

TEST_CASE("training contracts") {
  Network net(small_config());
  CHECK(error_of([&] { train(net, {}); }) == ErrorCode::EmptySampleSet);
  Rng rng(90);
  auto samples = random_samples(rng, small_config(), 2);
  samples[1].views.pop_back();
  CHECK(error_of([&] { train(net, samples); }) == ErrorCode::WrongViewCount);

  auto c = small_config();
  c.learning_rate = 1e300;
  Network wild(c);
  const auto s = random_samples(rng, c, 8);
  CHECK(error_of([&] { train(wild, s); }) == ErrorCode::DivergedTraining);
}

TEST_CASE("same seed, same loss history") {
  Rng rng(91);
  const auto c = small_config();
  const auto samples = random_samples(rng, c, 12);
  Network a(c), b(c);
  const auto ra = train(a, samples);
  const auto rb = train(b, samples);
  REQUIRE(ra.epoch_losses.size() == c.epochs);
  CHECK(ra.epoch_losses == rb.epoch_losses);
  for (double l : ra.epoch_losses) {
    CHECK(std::isfinite(l));
    CHECK(l >= 0.0);
  }
}

TEST_CASE("an 8-sample set overfits") {
  NetworkConfig c;
  c.views = 1;
  c.seed = 3;
  c.epochs = 500;
  c.learning_rate = 0.01;
  Rng rng(92);
  const auto samples = random_samples(rng, c, 8);
  Network net(c);
  const auto report = train(net, samples);
  CHECK(report.final_training_loss < 0.01 * report.initial_loss);
  std::vector<std::vector<FeatureGrid>> sets;
  for (const auto& s : samples) sets.push_back(s.views);
  const auto pred = predict(net, sets);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    CHECK(std::abs(pred[i] - samples[i].target) <= 0.05 * samples[i].target);
  }
}

TEST_CASE("running statistics") {
  auto c = small_config();
  Network net(c);
  Rng rng(93);
  std::vector<Tensor> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_input(rng, c));
  const auto fwd = net.forward(batch, Mode::Train);
  const auto mean0 = net.buffers()[0].value;
  net.update_running_stats(fwd.cache);
  const auto& mean1 = net.buffers()[0].value;
  REQUIRE(fwd.cache.blocks[0].bn.has_value());
  for (std::size_t ch = 0; ch < mean1.size(); ++ch) {
    const double expect = (1.0 - c.bn_momentum) * mean0[ch] + c.bn_momentum * fwd.cache.blocks[0].bn->mean[ch];
    CHECK(mean1[ch] == doctest::Approx(expect).epsilon(1e-12));
  }
  for (const auto& b : net.buffers()) {
    if (b.name.find("running_var") == std::string::npos) continue;
    for (double v : b.value.data()) CHECK(v > 0.0);
  }
}

TEST_CASE("checkpoints") {
  Rng rng(94);
  auto c = small_config();
  c.epochs = 3;
  Network net(c);
  train(net, random_samples(rng, c, 6));
  const auto bytes = encode_checkpoint(net);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.config() == net.config());
  CHECK(back.count_scale() == net.count_scale());
  const auto x = random_input(rng, c);
  CHECK(back.forward(x) == net.forward(x));

  const fs::path dir = fs::path(PODCOUNT_TEST_TMP) / "regressor";
  fs::create_directories(dir);
  save_model((dir / "m.ckpt").string(), net);
  CHECK(load_model((dir / "m.ckpt").string()).forward(x) == net.forward(x));

  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK(error_of([&] { decode_checkpoint(truncated); }) == ErrorCode::CorruptCheckpoint);

  auto flipped = bytes;
  flipped[bytes.size() - 20] ^= 0x40;
  CHECK(error_of([&] { decode_checkpoint(flipped); }) == ErrorCode::CorruptCheckpoint);

  auto version = bytes;
  version[8] = 99;
  CHECK(error_of([&] { decode_checkpoint(version); }) == ErrorCode::VersionMismatch);
}
