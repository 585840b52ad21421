#include "podcount/layers.hpp"

#include <algorithm>
#include <cmath>

#include "podcount/error.hpp"

namespace podcount::layers {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

// Output columns ox whose input column ox + k - pad lies in [0, in).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in,
                                                std::size_t k, std::size_t pad) {
  const std::size_t lo = pad > k ? pad - k : 0;
  const std::size_t hi_raw = in + pad > k ? in + pad - k : 0;
  return {std::min(lo, out), std::min(hi_raw, out)};
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weight,
                      const Tensor& bias, std::size_t padding) {
  require(input.rank() == 4 && weight.rank() == 4 && bias.rank() == 1,
          "conv2d expects (N,C,H,W) input and (Co,Ci,K,K) weight");
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  const std::size_t co = weight.dim(0), k = weight.dim(2);
  require(weight.dim(1) == ci && weight.dim(3) == k && bias.dim(0) == co,
          "conv2d weight does not match input channels");
  require(h + 2 * padding >= k && w + 2 * padding >= k,
          "conv2d kernel larger than padded input");
  const std::size_t ho = h + 2 * padding - k + 1;
  const std::size_t wo = w + 2 * padding - k + 1;
  Tensor out({n, co, ho, wo});
  const double* in = input.data().data();
  const double* wt = weight.data().data();
  double* o = out.data().data();

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oc = 0; oc < co; ++oc) {
      double* plane = o + (b * co + oc) * ho * wo;
      std::fill(plane, plane + ho * wo, bias[oc]);
      // Accumulates per pixel in (ic, ky, kx) order, the same order as a
      // direct loop, so results are bit-identical to it.
      for (std::size_t ic = 0; ic < ci; ++ic) {
        const double* src = in + (b * ci + ic) * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto [y0, y1] = valid_range(ho, h, ky, padding);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = wt[((oc * ci + ic) * k + ky) * k + kx];
            const auto [x0, x1] = valid_range(wo, w, kx, padding);
            for (std::size_t oy = y0; oy < y1; ++oy) {
              const double* row = src + (oy + ky - padding) * w;
              double* dst = plane + oy * wo;
              for (std::size_t ox = x0; ox < x1; ++ox) {
                dst[ox] += wv * row[ox + kx - padding];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                            const Tensor& grad_output, std::size_t padding) {
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  const std::size_t co = weight.dim(0), k = weight.dim(2);
  const std::size_t ho = grad_output.dim(2), wo = grad_output.dim(3);
  require(grad_output.dim(0) == n && grad_output.dim(1) == co &&
              ho == h + 2 * padding - k + 1 && wo == w + 2 * padding - k + 1,
          "conv2d gradient shape mismatch");
  Conv2dGrads g{Tensor(input.shape()), Tensor(weight.shape()), Tensor({co})};
  const double* in = input.data().data();
  const double* wt = weight.data().data();
  const double* go = grad_output.data().data();
  double* gi = g.input.data().data();
  double* gw = g.weight.data().data();

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oc = 0; oc < co; ++oc) {
      const double* gplane = go + (b * co + oc) * ho * wo;
      double sum = 0.0;
      for (std::size_t i = 0; i < ho * wo; ++i) sum += gplane[i];
      g.bias[oc] += sum;
      for (std::size_t ic = 0; ic < ci; ++ic) {
        const double* src = in + (b * ci + ic) * h * w;
        double* dsrc = gi + (b * ci + ic) * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const auto [y0, y1] = valid_range(ho, h, ky, padding);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((oc * ci + ic) * k + ky) * k + kx;
            const double wv = wt[widx];
            const auto [x0, x1] = valid_range(wo, w, kx, padding);
            double acc = 0.0;
            for (std::size_t oy = y0; oy < y1; ++oy) {
              const std::size_t off = (oy + ky - padding) * w;
              const double* row = src + off;
              double* drow = dsrc + off;
              const double* grow = gplane + oy * wo;
              for (std::size_t ox = x0; ox < x1; ++ox) {
                const std::size_t ix = ox + kx - padding;
                acc += grow[ox] * row[ix];
                drow[ix] += grow[ox] * wv;
              }
            }
            gw[widx] += acc;
          }
        }
      }
    }
  }
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& output, const Tensor& grad_output) {
  Tensor g = grad_output;
  auto gd = g.data();
  const auto od = output.data();
  for (std::size_t i = 0; i < gd.size(); ++i) {
    if (!(od[i] > 0.0)) gd[i] = 0.0;
  }
  return g;
}

PoolResult maxpool2_forward(const Tensor& input) {
  require(input.rank() == 4, "maxpool expects (N,C,H,W)");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  require(h >= 2 && w >= 2, "maxpool input smaller than its window");
  const std::size_t ho = h / 2, wo = w / 2;
  PoolResult r{Tensor({n, c, ho, wo}), std::vector<std::size_t>(n * c * ho * wo)};
  const double* in = input.data().data();
  std::size_t oi = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++oi) {
        std::size_t best = base + (2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * w + 2 * ox + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        r.output[oi] = in[best];
        r.argmax[oi] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2_backward(const std::vector<std::size_t>& argmax,
                         const std::vector<std::size_t>& input_shape,
                         const Tensor& grad_output) {
  require(argmax.size() == grad_output.size(), "maxpool gradient shape mismatch");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_output[i];
  return g;
}

Tensor batchnorm_forward_train(const Tensor& input, const Tensor& gamma,
                               const Tensor& beta, BatchNormCache& cache) {
  require(input.rank() == 4 && gamma.size() == input.dim(1) &&
              beta.size() == input.dim(1),
          "batchnorm parameter shape mismatch");
  const std::size_t n = input.dim(0), c = input.dim(1),
                    hw = input.dim(2) * input.dim(3);
  const double m = static_cast<double>(n * hw);
  cache.mean.assign(c, 0.0);
  cache.var.assign(c, 0.0);
  cache.normalized = Tensor(input.shape());
  Tensor out(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double* p = input.data().data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) sum += p[i];
    }
    const double mean = sum / m;
    double ss = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double* p = input.data().data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - mean) * (p[i] - mean);
    }
    const double var = ss / m;
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    cache.mean[ch] = mean;
    cache.var[ch] = var;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xhat = (input[off + i] - mean) * inv_std;
        cache.normalized[off + i] = xhat;
        out[off + i] = gamma[ch] * xhat + beta[ch];
      }
    }
  }
  return out;
}

Tensor batchnorm_forward_infer(const Tensor& input, const Tensor& gamma,
                               const Tensor& beta, const Tensor& running_mean,
                               const Tensor& running_var) {
  require(input.rank() == 4 && gamma.size() == input.dim(1),
          "batchnorm parameter shape mismatch");
  const std::size_t n = input.dim(0), c = input.dim(1),
                    hw = input.dim(2) * input.dim(3);
  Tensor out(input.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double inv_std = 1.0 / std::sqrt(running_var[ch] + kBatchNormEpsilon);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        out[off + i] =
            gamma[ch] * (input[off + i] - running_mean[ch]) * inv_std + beta[ch];
      }
    }
  }
  return out;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache,
                                  const Tensor& gamma,
                                  const Tensor& grad_output) {
  const Tensor& xhat = cache.normalized;
  const std::size_t n = xhat.dim(0), c = xhat.dim(1),
                    hw = xhat.dim(2) * xhat.dim(3);
  const double m = static_cast<double>(n * hw);
  BatchNormGrads g{Tensor(xhat.shape()), Tensor({c}), Tensor({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += grad_output[off + i];
        sum_dy_xhat += grad_output[off + i] * xhat[off + i];
      }
    }
    g.beta[ch] = sum_dy;
    g.gamma[ch] = sum_dy_xhat;
    const double inv_std = 1.0 / std::sqrt(cache.var[ch] + kBatchNormEpsilon);
    const double scale = gamma[ch] * inv_std / m;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        g.input[off + i] = scale * (m * grad_output[off + i] - sum_dy -
                                    xhat[off + i] * sum_dy_xhat);
      }
    }
  }
  return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weight,
                     const Tensor& bias) {
  require(input.rank() == 2 && weight.rank() == 2 && weight.dim(1) == input.dim(1) &&
              bias.size() == weight.dim(0),
          "dense layer shape mismatch");
  const std::size_t n = input.dim(0), in = input.dim(1), out_dim = weight.dim(0);
  Tensor out({n, out_dim});
  for (std::size_t b = 0; b < n; ++b) {
    const double* x = input.data().data() + b * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wrow = weight.data().data() + o * in;
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
      out[b * out_dim + o] = acc;
    }
  }
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weight,
                          const Tensor& grad_output) {
  const std::size_t n = input.dim(0), in = input.dim(1), out_dim = weight.dim(0);
  require(grad_output.dim(0) == n && grad_output.dim(1) == out_dim,
          "dense gradient shape mismatch");
  DenseGrads g{Tensor(input.shape()), Tensor(weight.shape()), Tensor({out_dim})};
  for (std::size_t b = 0; b < n; ++b) {
    const double* x = input.data().data() + b * in;
    double* dx = g.input.data().data() + b * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double go = grad_output[b * out_dim + o];
      g.bias[o] += go;
      const double* wrow = weight.data().data() + o * in;
      double* gwrow = g.weight.data().data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gwrow[i] += go * x[i];
        dx[i] += go * wrow[i];
      }
    }
  }
  return g;
}

}  // namespace podcount::layers
