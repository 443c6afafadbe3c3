#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ccrcnn/nn/layers.hpp"

namespace ccrcnn::nn {

// Trainable parameters and persistent (non-trainable) buffers of a network,
// gathered in a stable order. Names are unique dotted paths.
template <typename T>
struct ParamCollector {
  ParamList<T> trainable;
  ParamList<T> buffers;

  void add(std::string name, std::vector<std::size_t> shape,
           std::vector<T>& value, std::vector<T>& grad) {
    trainable.push_back({std::move(name), std::move(shape), value, grad});
  }
  void add_buffer(std::string name, std::vector<std::size_t> shape,
                  std::vector<T>& value) {
    buffers.push_back({std::move(name), std::move(shape), value, {}});
  }
  // Trainable parameters followed by buffers.
  ParamList<T> all() const {
    ParamList<T> out = trainable;
    out.insert(out.end(), buffers.begin(), buffers.end());
    return out;
  }
};

// A convolution layer: geometry, weights and gradient accumulators.
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::string name, std::size_t kernel, std::size_t in,
         std::size_t out, std::size_t stride = 1, std::size_t dilation = 1,
         std::size_t padding = 0)
      : name_(std::move(name)),
        params_(kernel, in, out, stride, dilation),
        padding_(padding),
        weight_grad_(params_.weights.size(), T(0)),
        bias_grad_(params_.bias.size(), T(0)) {}

  // "Same" padding for stride-1 convolutions with odd kernels.
  static std::size_t same_padding(std::size_t kernel, std::size_t dilation) {
    return dilation * (kernel - 1) / 2;
  }

  const std::string& name() const { return name_; }
  ConvParams<T>& params() { return params_; }
  const ConvParams<T>& params() const { return params_; }
  std::size_t padding() const { return padding_; }
  std::vector<T>& weight_grad() { return weight_grad_; }
  std::vector<T>& bias_grad() { return bias_grad_; }

  std::size_t parameter_count() const {
    return params_.weights.size() + params_.bias.size();
  }

  // Variance-scaling fan-in normal initialisation; bias zero.
  template <typename Rng>
  void init_fan_in(Rng& rng, double gain = 2.0) {
    const double fan_in =
        static_cast<double>(params_.kernel_size * params_.in_channels);
    init_normal(rng, std::sqrt(gain / fan_in));
  }
  template <typename Rng>
  void init_normal(Rng& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (T& w : params_.weights) w = static_cast<T>(dist(rng));
    std::fill(params_.bias.begin(), params_.bias.end(), T(0));
  }

  void collect(ParamCollector<T>& out) {
    out.add(name_ + ".weight",
            {params_.kernel_size, params_.in_channels, params_.out_channels},
            params_.weights, weight_grad_);
    out.add(name_ + ".bias", {params_.out_channels}, params_.bias, bias_grad_);
  }

 private:
  std::string name_;
  ConvParams<T> params_;
  std::size_t padding_ = 0;
  std::vector<T> weight_grad_;
  std::vector<T> bias_grad_;
};

template <typename T>
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(std::string name, std::size_t channels, T momentum = T(0.9),
              T epsilon = T(1e-5))
      : name_(std::move(name)),
        params_(channels, momentum, epsilon),
        scale_grad_(channels, T(0)),
        shift_grad_(channels, T(0)) {}

  const std::string& name() const { return name_; }
  BatchNormParams<T>& params() { return params_; }
  const BatchNormParams<T>& params() const { return params_; }
  std::vector<T>& scale_grad() { return scale_grad_; }
  std::vector<T>& shift_grad() { return shift_grad_; }
  std::size_t parameter_count() const { return 2 * params_.channels(); }

  void collect(ParamCollector<T>& out) {
    const std::size_t c = params_.channels();
    out.add(name_ + ".scale", {c}, params_.scale, scale_grad_);
    out.add(name_ + ".shift", {c}, params_.shift, shift_grad_);
    out.add_buffer(name_ + ".running_mean", {c}, params_.running_mean);
    out.add_buffer(name_ + ".running_var", {c}, params_.running_var);
  }

 private:
  std::string name_;
  BatchNormParams<T> params_;
  std::vector<T> scale_grad_;
  std::vector<T> shift_grad_;
};

template <typename T>
void zero_grads(ParamList<T>& params) {
  for (auto& p : params) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
std::size_t count_values(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

}  // namespace ccrcnn::nn
