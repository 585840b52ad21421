#pragma once

// Batched layer kernels for the count regressor. Activations are
// (N, C, H, W) tensors; dense layers take (N, features).

#include <cstddef>
#include <vector>

#include "podcount/tensor.hpp"

namespace podcount::layers {

// Convolution, stride 1, symmetric zero padding.
// weight (Co, Ci, K, K), bias (Co).
Tensor conv2d_forward(const Tensor& input, const Tensor& weight,
                      const Tensor& bias, std::size_t padding);

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                            const Tensor& grad_output, std::size_t padding);

Tensor relu_forward(const Tensor& input);
/// Gradient through ReLU given the forward output.
Tensor relu_backward(const Tensor& output, const Tensor& grad_output);

// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
struct PoolResult {
  Tensor output;
  /// Flat input index of each output's maximum (first maximum on ties).
  std::vector<std::size_t> argmax;
};
PoolResult maxpool2_forward(const Tensor& input);
Tensor maxpool2_backward(const std::vector<std::size_t>& argmax,
                         const std::vector<std::size_t>& input_shape,
                         const Tensor& grad_output);

// Batch normalization over (N, H, W) per channel.
inline constexpr double kBatchNormEpsilon = 1e-5;

struct BatchNormCache {
  Tensor normalized;      // x-hat, before scale and shift
  std::vector<double> mean;
  std::vector<double> var;  // biased batch variance
};
/// Train mode: normalizes with batch statistics.
Tensor batchnorm_forward_train(const Tensor& input, const Tensor& gamma,
                               const Tensor& beta, BatchNormCache& cache);
/// Inference mode: normalizes with running statistics.
Tensor batchnorm_forward_infer(const Tensor& input, const Tensor& gamma,
                               const Tensor& beta, const Tensor& running_mean,
                               const Tensor& running_var);
struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};
BatchNormGrads batchnorm_backward(const BatchNormCache& cache,
                                  const Tensor& gamma,
                                  const Tensor& grad_output);

// Fully connected: input (N, In), weight (Out, In), bias (Out).
Tensor dense_forward(const Tensor& input, const Tensor& weight,
                     const Tensor& bias);
struct DenseGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
DenseGrads dense_backward(const Tensor& input, const Tensor& weight,
                          const Tensor& grad_output);

}  // namespace podcount::layers
