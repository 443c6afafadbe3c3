#pragma once

// Forward and backward kernels for every layer the detector uses. All
// functions are pure apart from batchnorm_forward in training mode, which
// updates the running statistics it is handed.

#include <cstddef>
#include <span>
#include <vector>

#include "ccrcnn/nn/tensor.hpp"

namespace ccrcnn::nn {

enum class Mode { kTrain, kInfer };

// Weights are laid out [kernel][in_channel][out_channel], which is also the
// row-major (kernel * in) x out matrix used by the im2col product.
template <typename T>
struct ConvParams {
  std::size_t kernel_size = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvParams() = default;
  ConvParams(std::size_t kernel, std::size_t in, std::size_t out,
             std::size_t stride_ = 1, std::size_t dilation_ = 1)
      : kernel_size(kernel),
        in_channels(in),
        out_channels(out),
        stride(stride_),
        dilation(dilation_),
        weights(kernel * in * out, T(0)),
        bias(out, T(0)) {}

  T& weight(std::size_t k, std::size_t ci, std::size_t co) {
    return weights[(k * in_channels + ci) * out_channels + co];
  }
  T weight(std::size_t k, std::size_t ci, std::size_t co) const {
    return weights[(k * in_channels + ci) * out_channels + co];
  }

  // Throws ConfigError when the geometry or the array sizes are inconsistent.
  void validate() const;
};

std::size_t conv1d_output_length(std::size_t input_length,
                                 std::size_t kernel_size, std::size_t stride,
                                 std::size_t dilation, std::size_t padding);

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const ConvParams<T>& params,
                         std::size_t padding);

template <typename T>
struct ConvGradients {
  Tensor<T> input;
  std::vector<T> weights;
  std::vector<T> bias;
};

template <typename T>
ConvGradients<T> conv1d_backward(const Tensor<T>& input,
                                 const ConvParams<T>& params,
                                 const Tensor<T>& grad_out,
                                 std::size_t padding);

template <typename T>
struct BatchNormParams {
  std::vector<T> scale;
  std::vector<T> shift;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.9);
  T epsilon = T(1e-5);

  BatchNormParams() = default;
  explicit BatchNormParams(std::size_t channels, T momentum_ = T(0.9),
                           T epsilon_ = T(1e-5))
      : scale(channels, T(1)),
        shift(channels, T(0)),
        running_mean(channels, T(0)),
        running_var(channels, T(1)),
        momentum(momentum_),
        epsilon(epsilon_) {}

  std::size_t channels() const { return scale.size(); }
  void validate() const;
};

// What the backward pass needs from a training-mode forward.
template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;   // x_hat
  std::vector<T> inv_std; // 1 / sqrt(var + eps), per channel
};

// Training mode normalises every channel over the timestep axis and folds the
// batch statistics into the running estimates:
//   running = momentum * running + (1 - momentum) * batch.
// Inference mode uses the running estimates only. `cache` may be null.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, BatchNormParams<T>& params,
                            Mode mode, BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGradients {
  Tensor<T> input;
  std::vector<T> scale;
  std::vector<T> shift;
};

// Backward of the training-mode forward.
template <typename T>
BatchNormGradients<T> batchnorm_backward(const BatchNormCache<T>& cache,
                                         const BatchNormParams<T>& params,
                                         const Tensor<T>& grad_out);

// Backward of the inference-mode forward (a per-channel affine map).
template <typename T>
BatchNormGradients<T> batchnorm_infer_backward(const Tensor<T>& input,
                                               const BatchNormParams<T>& params,
                                               const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input);
// Takes the forward *output*.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

struct PoolGeometry {
  std::size_t size = 2;
  std::size_t stride = 2;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  std::size_t output_length(std::size_t input_length) const;
  void validate() const;
};

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  // Flat input index (t * channels + c) that won each output cell.
  std::vector<std::size_t> argmax;
};

// Padding cells never win. Ties go to the earliest timestep.
template <typename T>
MaxPoolResult<T> maxpool1d_forward(const Tensor<T>& input,
                                   const PoolGeometry& geometry);
template <typename T>
Tensor<T> maxpool1d_backward(std::size_t input_length, std::size_t channels,
                             std::span<const std::size_t> argmax,
                             const Tensor<T>& grad_out);

// Zero padding is included in the divisor (every window divides by `size`).
template <typename T>
Tensor<T> avgpool1d_forward(const Tensor<T>& input,
                            const PoolGeometry& geometry);
template <typename T>
Tensor<T> avgpool1d_backward(std::size_t input_length,
                             const PoolGeometry& geometry,
                             const Tensor<T>& grad_out);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> inputs);

// Splits along channels into consecutive slices of the given widths.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& input,
                                      std::span<const std::size_t> widths);

}  // namespace ccrcnn::nn
