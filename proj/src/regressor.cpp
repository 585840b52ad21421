#include "podcount/regressor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include <nlohmann/json.hpp>

#include "podcount/error.hpp"
#include "podcount/rng.hpp"

namespace podcount {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'C', 'R', 'M', 'C', 'K', 'P', 'T'};

// Stream offsets for the two generator streams derived from one seed.
constexpr std::uint64_t kInitStream = 0x696e6974ULL;     // "init"
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;  // "shuf"

Tensor stack(std::span<const Tensor> batch, const NetworkConfig& cfg) {
  const std::size_t c = cfg.fused_channels();
  const std::vector<std::size_t> expected{c, cfg.input_height, cfg.input_width};
  Tensor out({batch.size(), c, cfg.input_height, cfg.input_width});
  const std::size_t per = shape_product(expected);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].shape() != expected) {
      throw Error(ErrorCode::ShapeMismatch, "network input " +
                                                shape_string(batch[i].shape()) +
                                                " but expected " +
                                                shape_string(expected));
    }
    std::copy(batch[i].data().begin(), batch[i].data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

Tensor reshape(Tensor t, std::vector<std::size_t> shape) {
  std::vector<double> data(t.data().begin(), t.data().end());
  return Tensor(std::move(shape), std::move(data));
}

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::span<const unsigned char> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  [[nodiscard]] bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is truncated");
    }
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_{0};
};

}  // namespace

void NetworkConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, what);
  };
  if (views == 0 || input_channels == 0) fail("views and input channels must be positive");
  if (conv_blocks.size() != 3) fail("the regressor has exactly 3 conv blocks");
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& b = conv_blocks[i];
    const bool pooled = i < 2;
    if (b.has_pool != pooled || b.has_batchnorm != pooled) {
      fail("conv blocks 1-2 need pooling and batch norm, block 3 neither");
    }
    if (b.out_channels == 0 || b.kernel == 0 || b.kernel % 2 == 0) {
      fail("conv blocks need positive channels and an odd kernel");
    }
  }
  if (input_height < 4 || input_width < 4) fail("input grid must be at least 4x4");
  if (fc_sizes.size() != 3 || fc_sizes.back() != 1) {
    fail("the regressor has exactly 3 fully connected layers ending in width 1");
  }
  if (std::find(fc_sizes.begin(), fc_sizes.end(), 0U) != fc_sizes.end()) {
    fail("fully connected widths must be positive");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail("learning rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) fail("bn momentum must lie in (0, 1]");
  if (batch_size == 0) fail("batch size must be positive");
}

std::string network_config_to_json(const NetworkConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.conv_blocks) {
    blocks.push_back({{"out_channels", b.out_channels},
                      {"kernel", b.kernel},
                      {"has_pool", b.has_pool},
                      {"has_batchnorm", b.has_batchnorm}});
  }
  json j = {{"views", c.views},
            {"input_channels", c.input_channels},
            {"input_height", c.input_height},
            {"input_width", c.input_width},
            {"conv_blocks", blocks},
            {"fc_sizes", c.fc_sizes},
            {"seed", c.seed},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"bn_momentum", c.bn_momentum}};
  return j.dump();
}

NetworkConfig network_config_from_json(std::string_view text) {
  NetworkConfig c;
  try {
    const json j = json::parse(text);
    c.views = j.value("views", c.views);
    c.input_channels = j.value("input_channels", c.input_channels);
    c.input_height = j.value("input_height", c.input_height);
    c.input_width = j.value("input_width", c.input_width);
    if (j.contains("conv_blocks")) {
      c.conv_blocks.clear();
      for (const auto& b : j.at("conv_blocks")) {
        c.conv_blocks.push_back({b.at("out_channels").get<std::size_t>(),
                                 b.value("kernel", std::size_t{3}),
                                 b.at("has_pool").get<bool>(),
                                 b.at("has_batchnorm").get<bool>()});
      }
    }
    if (j.contains("fc_sizes")) c.fc_sizes = j.at("fc_sizes").get<std::vector<std::size_t>>();
    c.seed = j.value("seed", c.seed);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("network config: ") + e.what());
  }
  return c;
}

Tensor fuse_views(std::span<const FeatureGrid> grids, std::size_t expected_views) {
  if (grids.empty() || (expected_views != 0 && grids.size() != expected_views)) {
    throw Error(ErrorCode::WrongViewCount,
                "got " + std::to_string(grids.size()) + " views, expected " +
                    std::to_string(expected_views));
  }
  const auto& first = grids.front();
  for (const auto& g : grids) {
    if (g.channels() != first.channels() || g.height() != first.height() ||
        g.width() != first.width()) {
      throw Error(ErrorCode::ShapeMismatch, "views have different grid shapes");
    }
  }
  Tensor out({grids.size() * first.channels(), first.height(), first.width()});
  std::size_t pos = 0;
  for (const auto& g : grids) {
    for (float v : g.data()) out[pos++] = static_cast<double>(v);
  }
  return out;
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.seed ^ kInitStream);
  auto uniform_init = [&](std::vector<std::size_t> shape, double fan_in,
                          double fan_out) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data()) v = rng.uniform(-limit, limit);
    return t;
  };

  std::size_t c = config_.fused_channels();
  std::size_t h = config_.input_height;
  std::size_t w = config_.input_width;
  for (std::size_t i = 0; i < config_.conv_blocks.size(); ++i) {
    const auto& b = config_.conv_blocks[i];
    const std::string p = "conv" + std::to_string(i + 1);
    const double k2 = static_cast<double>(b.kernel * b.kernel);
    params_.push_back({p + ".weight",
                       uniform_init({b.out_channels, c, b.kernel, b.kernel},
                                    static_cast<double>(c) * k2,
                                    static_cast<double>(b.out_channels) * k2)});
    params_.push_back({p + ".bias", Tensor({b.out_channels})});
    c = b.out_channels;
    if (b.has_pool) {
      h /= 2;
      w /= 2;
    }
    if (b.has_batchnorm) {
      const std::string bn = "bn" + std::to_string(i + 1);
      Tensor gamma({c});
      gamma.fill(1.0);
      params_.push_back({bn + ".gamma", std::move(gamma)});
      params_.push_back({bn + ".beta", Tensor({c})});
      Tensor var({c});
      var.fill(1.0);
      buffers_.push_back({bn + ".running_mean", Tensor({c})});
      buffers_.push_back({bn + ".running_var", std::move(var)});
    }
  }
  flat_features_ = {c, h, w};
  std::size_t in = c * h * w;
  for (std::size_t i = 0; i < config_.fc_sizes.size(); ++i) {
    const std::size_t out = config_.fc_sizes[i];
    const std::string p = "fc" + std::to_string(i + 1);
    params_.push_back({p + ".weight",
                       uniform_init({out, in}, static_cast<double>(in),
                                    static_cast<double>(out))});
    params_.push_back({p + ".bias", Tensor({out})});
    in = out;
  }
}

std::vector<NamedTensor>& Network::mutable_parameters() noexcept {
  ++version_;
  return params_;
}

std::vector<NamedTensor>& Network::mutable_buffers() noexcept {
  ++version_;
  return buffers_;
}

NamedTensor& Network::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) {
      ++version_;
      return p;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "no parameter named " + std::string(name));
}

ForwardResult Network::forward(std::span<const Tensor> batch, Mode mode) const {
  const bool train = mode == Mode::Train;
  ForwardResult result;
  ForwardCache& cache = result.cache;
  Tensor x = stack(batch, config_);
  const std::size_t n = batch.size();

  std::size_t pi = 0;  // parameter cursor
  std::size_t bi = 0;  // buffer cursor
  for (const auto& b : config_.conv_blocks) {
    ForwardCache::Block blk;
    const Tensor& weight = params_[pi++].value;
    const Tensor& bias = params_[pi++].value;
    Tensor y = layers::relu_forward(
        layers::conv2d_forward(x, weight, bias, b.kernel / 2));
    if (train) {
      blk.input = std::move(x);
      blk.relu_out = y;
    }
    if (b.has_pool) {
      auto pooled = layers::maxpool2_forward(y);
      y = pooled.output;
      if (train) {
        blk.pool_input_shape = blk.relu_out.shape();
        blk.pool = std::move(pooled);
      }
    }
    if (b.has_batchnorm) {
      const Tensor& gamma = params_[pi++].value;
      const Tensor& beta = params_[pi++].value;
      if (train) {
        layers::BatchNormCache bn;
        y = layers::batchnorm_forward_train(y, gamma, beta, bn);
        blk.bn = std::move(bn);
      } else {
        y = layers::batchnorm_forward_infer(y, gamma, beta, buffers_[bi].value,
                                            buffers_[bi + 1].value);
      }
      bi += 2;
    }
    x = std::move(y);
    if (train) cache.blocks.push_back(std::move(blk));
  }

  x = reshape(std::move(x), {n, shape_product(flat_features_)});
  const std::size_t n_fc = config_.fc_sizes.size();
  for (std::size_t i = 0; i < n_fc; ++i) {
    const Tensor& weight = params_[pi++].value;
    const Tensor& bias = params_[pi++].value;
    Tensor z = layers::dense_forward(x, weight, bias);
    if (train) cache.fc_inputs.push_back(std::move(x));
    if (i + 1 < n_fc) {
      z = layers::relu_forward(z);
      if (train) cache.fc_relu_outputs.push_back(z);
    }
    x = std::move(z);
  }

  result.outputs.assign(x.data().begin(), x.data().end());
  for (double v : result.outputs) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteActivation, "network output is not finite");
    }
  }
  if (train) {
    cache.parameter_version = version_;
    cache.valid = true;
  }
  return result;
}

double Network::forward(const Tensor& input, Mode mode) const {
  return forward(std::span<const Tensor>(&input, 1), mode).outputs.front();
}

std::vector<Tensor> Network::backward(const ForwardCache& cache,
                                      std::span<const double> loss_gradient) const {
  if (!cache.valid || cache.parameter_version != version_) {
    throw Error(ErrorCode::StaleCache,
                "backward needs a train-mode forward pass with current parameters");
  }
  const std::size_t n = cache.fc_inputs.front().dim(0);
  if (loss_gradient.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "one loss gradient per sample expected");
  }
  std::vector<Tensor> grads(params_.size());
  std::size_t pi = params_.size();

  Tensor g({n, 1}, std::vector<double>(loss_gradient.begin(), loss_gradient.end()));
  const std::size_t n_fc = config_.fc_sizes.size();
  for (std::size_t i = n_fc; i-- > 0;) {
    if (i + 1 < n_fc) g = layers::relu_backward(cache.fc_relu_outputs[i], g);
    pi -= 2;
    auto dg = layers::dense_backward(cache.fc_inputs[i], params_[pi].value, g);
    grads[pi] = std::move(dg.weight);
    grads[pi + 1] = std::move(dg.bias);
    g = std::move(dg.input);
  }

  std::vector<std::size_t> shape{n};
  shape.insert(shape.end(), flat_features_.begin(), flat_features_.end());
  g = reshape(std::move(g), shape);
  for (std::size_t i = config_.conv_blocks.size(); i-- > 0;) {
    const auto& b = config_.conv_blocks[i];
    const auto& blk = cache.blocks[i];
    if (b.has_batchnorm) {
      pi -= 2;
      auto dg = layers::batchnorm_backward(*blk.bn, params_[pi].value, g);
      grads[pi] = std::move(dg.gamma);
      grads[pi + 1] = std::move(dg.beta);
      g = std::move(dg.input);
    }
    if (b.has_pool) {
      g = layers::maxpool2_backward(blk.pool->argmax, blk.pool_input_shape, g);
    }
    g = layers::relu_backward(blk.relu_out, g);
    pi -= 2;
    auto dg = layers::conv2d_backward(blk.input, params_[pi].value, g, b.kernel / 2);
    grads[pi] = std::move(dg.weight);
    grads[pi + 1] = std::move(dg.bias);
    g = std::move(dg.input);
  }
  return grads;
}

void Network::update_running_stats(const ForwardCache& cache) {
  const double m = config_.bn_momentum;
  std::size_t bi = 0;
  for (const auto& blk : cache.blocks) {
    if (!blk.bn) continue;
    const auto& shape = blk.bn->normalized.shape();
    const double count = static_cast<double>(shape[0] * shape[2] * shape[3]);
    const double unbias = count > 1 ? count / (count - 1) : 1.0;
    Tensor& mean = buffers_[bi].value;
    Tensor& var = buffers_[bi + 1].value;
    for (std::size_t c = 0; c < mean.size(); ++c) {
      mean[c] = (1.0 - m) * mean[c] + m * blk.bn->mean[c];
      var[c] = (1.0 - m) * var[c] + m * blk.bn->var[c] * unbias;
    }
    bi += 2;
  }
  ++version_;
}

namespace {

struct PreparedSet {
  std::vector<Tensor> inputs;
  std::vector<double> targets;
};

PreparedSet prepare(const NetworkConfig& cfg, std::span<const TrainSample> samples) {
  PreparedSet set;
  set.inputs.reserve(samples.size());
  for (const auto& s : samples) {
    set.inputs.push_back(fuse_views(s.views, cfg.views));
    set.targets.push_back(s.target);
  }
  return set;
}

double mse(const Network& net, const PreparedSet& set) {
  if (set.inputs.empty()) return 0.0;
  const auto out = net.forward(set.inputs, Mode::Infer).outputs;
  double sum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - set.targets[i] / net.count_scale();
    sum += d * d;
  }
  return sum / static_cast<double>(out.size());
}

}  // namespace

double evaluate_loss(const Network& net, std::span<const TrainSample> samples) {
  return mse(net, prepare(net.config(), samples));
}

TrainReport train(Network& net, std::span<const TrainSample> samples,
                  std::span<const TrainSample> validation) {
  if (samples.empty()) {
    throw Error(ErrorCode::EmptySampleSet, "no training samples");
  }
  const NetworkConfig& cfg = net.config();
  const PreparedSet train_set = prepare(cfg, samples);
  const PreparedSet valid_set = prepare(cfg, validation);

  TrainReport report;
  report.seed = cfg.seed;
  if (cfg.epochs > 0) {
    const double mean_target =
        std::accumulate(train_set.targets.begin(), train_set.targets.end(), 0.0) /
        static_cast<double>(train_set.targets.size());
    net.set_count_scale(mean_target > 0.0 ? mean_target : 1.0);
  }
  const double scale = net.count_scale();
  report.initial_loss = mse(net, train_set);

  std::vector<Tensor> velocity;
  for (const auto& p : net.parameters()) velocity.emplace_back(p.value.shape());

  Rng shuffle_rng(cfg.seed ^ kShuffleStream);
  std::vector<std::size_t> order(train_set.inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Tensor> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t bsz = end - start;
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set.inputs[order[i]]);

      ForwardResult fr;
      try {
        fr = net.forward(batch, Mode::Train);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteActivation) {
          throw Error(ErrorCode::DivergedTraining,
                      "non-finite output at epoch " + std::to_string(epoch));
        }
        throw;
      }
      std::vector<double> dloss(bsz);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < bsz; ++i) {
        const double d = fr.outputs[i] - train_set.targets[order[start + i]] / scale;
        batch_loss += d * d;
        dloss[i] = 2.0 * d / static_cast<double>(bsz);
      }
      epoch_sum += batch_loss;
      const auto grads = net.backward(fr.cache, dloss);
      net.update_running_stats(fr.cache);
      auto& params = net.mutable_parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto v = velocity[p].data();
        auto w = params[p].value.data();
        const auto g = grads[p].data();
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] = cfg.momentum * v[i] - cfg.learning_rate * g[i];
          w[i] += v[i];
        }
      }
    }
    const double epoch_loss = epoch_sum / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorCode::DivergedTraining,
                  "training loss is not finite at epoch " + std::to_string(epoch));
    }
    report.epoch_losses.push_back(epoch_loss);
  }

  try {
    report.final_training_loss = mse(net, train_set);
    report.final_validation_loss =
        valid_set.inputs.empty() ? report.final_training_loss : mse(net, valid_set);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteActivation) {
      throw Error(ErrorCode::DivergedTraining, "trained network output is not finite");
    }
    throw;
  }
  return report;
}

std::vector<double> predict(const Network& net,
                            std::span<const std::vector<FeatureGrid>> view_sets) {
  std::vector<Tensor> inputs;
  inputs.reserve(view_sets.size());
  for (const auto& vs : view_sets) inputs.push_back(fuse_views(vs, net.config().views));
  std::vector<double> out;
  out.reserve(inputs.size());
  // One sample at a time: infer mode is per-sample, and this bounds memory.
  for (const auto& x : inputs) out.push_back(net.forward(x, Mode::Infer) * net.count_scale());
  return out;
}

std::vector<unsigned char> encode_checkpoint(const Network& net) {
  std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_le(out, kCheckpointVersion);
  const json header = {{"config", json::parse(network_config_to_json(net.config()))},
                       {"count_scale", net.count_scale()}};
  const std::string text = header.dump();
  put_le(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());

  std::vector<const NamedTensor*> blocks;
  for (const auto& p : net.parameters()) blocks.push_back(&p);
  for (const auto& b : net.buffers()) blocks.push_back(&b);
  put_le(out, static_cast<std::uint32_t>(blocks.size()));
  for (const NamedTensor* t : blocks) {
    put_le(out, static_cast<std::uint32_t>(t->name.size()));
    out.insert(out.end(), t->name.begin(), t->name.end());
    put_le(out, static_cast<std::uint32_t>(t->value.rank()));
    for (auto d : t->value.shape()) put_le(out, static_cast<std::uint64_t>(d));
    const std::size_t start = out.size();
    for (double v : t->value.data()) put_le(out, v);
    const std::uint64_t sum = fnv1a64(std::span(out).subspan(start));
    put_le(out, sum);
  }
  return out;
}

Network decode_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  const auto magic = r.take(sizeof(kCheckpointMagic));
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw Error(ErrorCode::CorruptCheckpoint, "not a regressor checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "checkpoint version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  const auto text_len = r.get<std::uint64_t>();
  if (text_len > bytes.size()) throw Error(ErrorCode::CorruptCheckpoint, "bad header length");
  const auto text = r.take(static_cast<std::size_t>(text_len));
  json header;
  NetworkConfig cfg;
  try {
    header = json::parse(text.begin(), text.end());
    cfg = network_config_from_json(header.at("config").dump());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("bad header: ") + e.what());
  }
  Network net(cfg);
  net.set_count_scale(header.value("count_scale", 1.0));

  const auto n_blocks = r.get<std::uint32_t>();
  auto& params = net.mutable_parameters();
  auto& buffers = net.mutable_buffers();
  if (n_blocks != params.size() + buffers.size()) {
    throw Error(ErrorCode::CorruptCheckpoint, "block count does not match config");
  }
  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    const auto name_len = r.get<std::uint32_t>();
    const auto name_bytes = r.take(name_len);
    const std::string name(name_bytes.begin(), name_bytes.end());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw Error(ErrorCode::CorruptCheckpoint, "bad rank in block " + name);
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    }
    NamedTensor* target = nullptr;
    for (auto& p : params) if (p.name == name) target = &p;
    for (auto& p : buffers) if (p.name == name) target = &p;
    if (target == nullptr || target->value.shape() != shape) {
      throw Error(ErrorCode::CorruptCheckpoint, "unexpected block " + name);
    }
    const auto raw = r.take(target->value.size() * 8);
    if (r.get<std::uint64_t>() != fnv1a64(raw)) {
      throw Error(ErrorCode::CorruptCheckpoint, "checksum mismatch in block " + name);
    }
    Reader values(raw);
    for (auto& v : target->value.data()) {
      v = values.get<double>();
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::CorruptCheckpoint, "non-finite value in block " + name);
      }
    }
  }
  if (!r.done()) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes after blocks");
  return net;
}

void save_model(const std::string& path, const Network& net) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

Network load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace podcount
