#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "podcount/featurize.hpp"
#include "podcount/layers.hpp"
#include "podcount/tensor.hpp"

namespace podcount {

struct ConvBlockConfig {
  std::size_t out_channels{16};
  std::size_t kernel{3};
  bool has_pool{true};
  bool has_batchnorm{true};

  friend bool operator==(const ConvBlockConfig&, const ConvBlockConfig&) = default;
};

/// Count-regression head: three conv blocks (conv -> ReLU -> 2x2 max-pool ->
/// batch norm on the first two, conv -> ReLU on the third), flatten, then
/// three fully connected layers with ReLU between them and a linear output.
struct NetworkConfig {
  std::size_t views{2};
  std::size_t input_channels{3};
  std::size_t input_height{16};
  std::size_t input_width{16};
  std::vector<ConvBlockConfig> conv_blocks{
      {16, 3, true, true}, {32, 3, true, true}, {64, 3, false, false}};
  std::vector<std::size_t> fc_sizes{64, 16, 1};
  std::uint64_t seed{0};
  double learning_rate{0.01};
  double momentum{0.9};
  std::size_t epochs{100};
  std::size_t batch_size{8};
  /// Exponential moving average factor for batch-norm running statistics.
  double bn_momentum{0.1};

  /// Throws InvalidConfig when the layer structure or hyperparameters are
  /// out of range.
  void validate() const;
  [[nodiscard]] std::size_t fused_channels() const noexcept {
    return views * input_channels;
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

std::string network_config_to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(std::string_view text);

/// Concatenates V grids along the channel axis, view order preserved.
/// Throws WrongViewCount when grids.size() != expected_views (unless
/// expected_views is 0) and ShapeMismatch when grid shapes differ.
Tensor fuse_views(std::span<const FeatureGrid> grids,
                  std::size_t expected_views = 0);

enum class Mode { Train, Infer };

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Activations kept from a train-mode forward pass for backward().
struct ForwardCache {
  std::uint64_t parameter_version{0};
  bool valid{false};
  struct Block {
    Tensor input;
    Tensor relu_out;
    std::optional<layers::PoolResult> pool;
    std::vector<std::size_t> pool_input_shape;
    std::optional<layers::BatchNormCache> bn;
  };
  std::vector<Block> blocks;
  std::vector<Tensor> fc_inputs;  // input of each fc layer
  std::vector<Tensor> fc_relu_outputs;
};

struct ForwardResult {
  std::vector<double> outputs;
  ForwardCache cache;  // valid only for Mode::Train
};

class Network {
 public:
  /// Initializes weights uniformly in +-sqrt(6 / (fan_in + fan_out)) from a
  /// generator seeded with config.seed; biases and BN shifts start at 0, BN
  /// scales at 1, running means 0 and running variances 1.
  explicit Network(NetworkConfig config);

  [[nodiscard]] const NetworkConfig& config() const noexcept { return config_; }

  /// Batch forward pass. Train mode normalizes with batch statistics and
  /// returns a cache for backward(); Infer mode uses running statistics.
  /// Throws ShapeMismatch on a wrong input shape, NonFiniteActivation when an
  /// output is not finite.
  [[nodiscard]] ForwardResult forward(std::span<const Tensor> batch,
                                      Mode mode) const;
  [[nodiscard]] double forward(const Tensor& input, Mode mode = Mode::Infer) const;

  /// Parameter gradients of sum_i loss_gradient[i] * output_i, in
  /// parameters() order. Throws StaleCache when the cache was not produced by
  /// a train-mode forward with the current parameters.
  [[nodiscard]] std::vector<Tensor> backward(
      const ForwardCache& cache, std::span<const double> loss_gradient) const;

  /// Folds the batch statistics of a train-mode pass into the running
  /// statistics.
  void update_running_stats(const ForwardCache& cache);

  [[nodiscard]] const std::vector<NamedTensor>& parameters() const noexcept {
    return params_;
  }
  [[nodiscard]] const std::vector<NamedTensor>& buffers() const noexcept {
    return buffers_;
  }
  /// Mutable access; invalidates outstanding forward caches.
  std::vector<NamedTensor>& mutable_parameters() noexcept;
  std::vector<NamedTensor>& mutable_buffers() noexcept;
  [[nodiscard]] NamedTensor& parameter(std::string_view name);

  /// Prediction = network output * count_scale. Training sets the scale to
  /// the mean training count; an untrained network uses 1.
  [[nodiscard]] double count_scale() const noexcept { return count_scale_; }
  void set_count_scale(double scale) noexcept { count_scale_ = scale; }

 private:
  NetworkConfig config_;
  std::vector<NamedTensor> params_;
  std::vector<NamedTensor> buffers_;
  std::vector<std::size_t> flat_features_;
  double count_scale_{1.0};
  std::uint64_t version_{1};
};

struct TrainSample {
  std::vector<FeatureGrid> views;
  double target{0.0};
};

struct TrainReport {
  std::vector<double> epoch_losses;
  /// Infer-mode MSE (normalized units) over the training set before training.
  double initial_loss{0.0};
  /// Infer-mode MSE over the training set after training.
  double final_training_loss{0.0};
  /// Infer-mode MSE over the validation set, or the training set if none.
  double final_validation_loss{0.0};
  std::uint64_t seed{0};
};

/// Mini-batch SGD with momentum on the mean squared error between outputs
/// and targets divided by the mean training target. Batches are drawn from a
/// per-epoch shuffle seeded from config.seed. Throws EmptySampleSet,
/// WrongViewCount / ShapeMismatch on bad samples, DivergedTraining when a
/// loss becomes non-finite.
TrainReport train(Network& net, std::span<const TrainSample> samples,
                  std::span<const TrainSample> validation = {});

/// Mean squared error in normalized units, infer mode.
double evaluate_loss(const Network& net, std::span<const TrainSample> samples);

/// One prediction per view set, in input order, unrounded.
std::vector<double> predict(const Network& net,
                            std::span<const std::vector<FeatureGrid>> view_sets);

// Checkpoint: magic "PCRMCKPT", uint32 version, uint64 length + network
// config JSON (including seed and count scale), uint32 block count, then per
// block: uint32 name length, name, uint32 rank, uint64 extents, little-endian
// binary64 values, uint64 FNV-1a checksum of the value bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<unsigned char> encode_checkpoint(const Network& net);
/// Throws VersionMismatch or CorruptCheckpoint.
Network decode_checkpoint(std::span<const unsigned char> bytes);
void save_model(const std::string& path, const Network& net);
Network load_model(const std::string& path);

}  // namespace podcount
