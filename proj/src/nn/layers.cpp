#include "ccrcnn/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace ccrcnn::nn {
namespace {

template <typename T>
using RowMatrix =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
bool is_pointwise(const ConvParams<T>& p, std::size_t padding) {
  return p.kernel_size == 1 && p.stride == 1 && padding == 0;
}

// Eigen picks its vectorised summation order from the operand addresses, so
// every operand goes through its own (always aligned) storage first. Without
// this, identical runs differ in the last bits depending on where the heap
// put each buffer.
template <typename T>
RowMatrix<T> aligned_copy(const T* data, Eigen::Index rows, Eigen::Index cols) {
  return ConstMatrixMap<T>(data, rows, cols);
}

template <typename T>
void copy_out(const RowMatrix<T>& m, T* dst) {
  std::memcpy(dst, m.data(), static_cast<std::size_t>(m.size()) * sizeof(T));
}

// Row t of the result holds the receptive field of output t, taps
// concatenated: [x(t*s - pad), x(t*s + d - pad), ...], zeros off the edges.
template <typename T>
RowMatrix<T> im2col(const Tensor<T>& input, const ConvParams<T>& p,
                    std::size_t padding, std::size_t out_length) {
  const std::size_t cin = p.in_channels;
  const std::size_t row_width = p.kernel_size * cin;
  if (is_pointwise(p, padding)) {
    return aligned_copy(input.raw(), static_cast<Eigen::Index>(out_length),
                        static_cast<Eigen::Index>(row_width));
  }
  RowMatrix<T> col = RowMatrix<T>::Zero(static_cast<Eigen::Index>(out_length),
                                        static_cast<Eigen::Index>(row_width));
  const auto in_length = static_cast<std::ptrdiff_t>(input.length());
  for (std::size_t t = 0; t < out_length; ++t) {
    T* dst = col.data() + t * row_width;
    for (std::size_t k = 0; k < p.kernel_size; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(t * p.stride + k * p.dilation) -
                       static_cast<std::ptrdiff_t>(padding);
      if (src < 0 || src >= in_length) continue;
      std::memcpy(dst + k * cin, input.raw() + src * cin, cin * sizeof(T));
    }
  }
  return col;
}

void check_conv_input(std::size_t length, std::size_t channels,
                      std::size_t in_channels, std::size_t kernel,
                      std::size_t dilation, std::size_t padding) {
  if (channels != in_channels) {
    throw ConfigError("conv1d: input has " + std::to_string(channels) +
                      " channels, layer expects " + std::to_string(in_channels));
  }
  if (length + 2 * padding < dilation * (kernel - 1) + 1) {
    throw ConfigError("conv1d: input length " + std::to_string(length) +
                      " (padding " + std::to_string(padding) +
                      ") is shorter than the dilated kernel extent " +
                      std::to_string(dilation * (kernel - 1) + 1));
  }
}

}  // namespace

template <typename T>
void ConvParams<T>::validate() const {
  if (kernel_size < 1 || stride < 1 || dilation < 1) {
    throw ConfigError("conv1d: kernel_size, stride and dilation must be >= 1");
  }
  if (weights.size() != kernel_size * in_channels * out_channels) {
    throw ConfigError("conv1d: weight array has " +
                      std::to_string(weights.size()) + " entries, expected " +
                      std::to_string(kernel_size * in_channels * out_channels));
  }
  if (bias.size() != out_channels) {
    throw ConfigError("conv1d: bias array has " + std::to_string(bias.size()) +
                      " entries, expected " + std::to_string(out_channels));
  }
}

std::size_t conv1d_output_length(std::size_t input_length,
                                 std::size_t kernel_size, std::size_t stride,
                                 std::size_t dilation, std::size_t padding) {
  const std::size_t extent = dilation * (kernel_size - 1) + 1;
  const std::size_t padded = input_length + 2 * padding;
  if (padded < extent) return 0;
  return (padded - extent) / stride + 1;
}

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const ConvParams<T>& params,
                         std::size_t padding) {
  params.validate();
  check_conv_input(input.length(), input.channels(), params.in_channels,
                   params.kernel_size, params.dilation, padding);
  const std::size_t out_length =
      conv1d_output_length(input.length(), params.kernel_size, params.stride,
                           params.dilation, padding);
  const auto inner = static_cast<Eigen::Index>(params.kernel_size * params.in_channels);
  const auto cout = static_cast<Eigen::Index>(params.out_channels);

  const RowMatrix<T> col = im2col(input, params, padding, out_length);
  const RowMatrix<T> w = aligned_copy(params.weights.data(), inner, cout);
  RowMatrix<T> y = col * w;
  y.rowwise() += aligned_copy(params.bias.data(), 1, cout).row(0);
  Tensor<T> output(out_length, params.out_channels);
  copy_out(y, output.raw());
  return output;
}

template <typename T>
ConvGradients<T> conv1d_backward(const Tensor<T>& input,
                                 const ConvParams<T>& params,
                                 const Tensor<T>& grad_out,
                                 std::size_t padding) {
  params.validate();
  check_conv_input(input.length(), input.channels(), params.in_channels,
                   params.kernel_size, params.dilation, padding);
  const std::size_t out_length =
      conv1d_output_length(input.length(), params.kernel_size, params.stride,
                           params.dilation, padding);
  if (grad_out.length() != out_length ||
      grad_out.channels() != params.out_channels) {
    throw ConfigError("conv1d_backward: grad_out shape " +
                      shape_string(grad_out) + " does not match output shape " +
                      shape_string(out_length, params.out_channels));
  }
  const auto rows = static_cast<Eigen::Index>(out_length);
  const std::size_t cin = params.in_channels;
  const auto inner = static_cast<Eigen::Index>(params.kernel_size * cin);
  const auto cout = static_cast<Eigen::Index>(params.out_channels);

  ConvGradients<T> grads;
  grads.weights.assign(params.weights.size(), T(0));
  grads.bias.assign(params.bias.size(), T(0));
  grads.input = Tensor<T>(input.length(), cin);

  const RowMatrix<T> g = aligned_copy(grad_out.raw(), rows, cout);
  const RowMatrix<T> w = aligned_copy(params.weights.data(), inner, cout);
  const RowMatrix<T> col = im2col(input, params, padding, out_length);
  copy_out(RowMatrix<T>(g.colwise().sum()), grads.bias.data());
  copy_out(RowMatrix<T>(col.transpose() * g), grads.weights.data());
  const RowMatrix<T> grad_col = g * w.transpose();
  if (is_pointwise(params, padding)) {
    copy_out(grad_col, grads.input.raw());
    return grads;
  }

  const auto in_length = static_cast<std::ptrdiff_t>(input.length());
  for (std::size_t t = 0; t < out_length; ++t) {
    const T* src = grad_col.data() + t * static_cast<std::size_t>(inner);
    for (std::size_t k = 0; k < params.kernel_size; ++k) {
      const auto dst = static_cast<std::ptrdiff_t>(t * params.stride + k * params.dilation) -
                       static_cast<std::ptrdiff_t>(padding);
      if (dst < 0 || dst >= in_length) continue;
      T* out = grads.input.raw() + dst * cin;
      const T* chunk = src + k * cin;
      for (std::size_t c = 0; c < cin; ++c) out[c] += chunk[c];
    }
  }
  return grads;
}

template <typename T>
void BatchNormParams<T>::validate() const {
  const std::size_t c = scale.size();
  if (shift.size() != c || running_mean.size() != c || running_var.size() != c) {
    throw ConfigError("batchnorm: parameter arrays disagree on channel count");
  }
  if (!(epsilon > T(0))) throw ConfigError("batchnorm: epsilon must be > 0");
  if (!(momentum > T(0) && momentum < T(1))) {
    throw ConfigError("batchnorm: momentum must lie in (0, 1)");
  }
  for (T v : running_var) {
    if (v < T(0)) throw ConfigError("batchnorm: negative running variance");
  }
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, BatchNormParams<T>& params,
                            Mode mode, BatchNormCache<T>* cache) {
  params.validate();
  const std::size_t channels = input.channels();
  const std::size_t length = input.length();
  if (channels != params.channels()) {
    throw ConfigError("batchnorm: input has " + std::to_string(channels) +
                      " channels, parameters have " +
                      std::to_string(params.channels()));
  }
  Tensor<T> output(length, channels);

  if (mode == Mode::kInfer) {
    std::vector<T> a(channels), b(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      a[c] = params.scale[c] / std::sqrt(params.running_var[c] + params.epsilon);
      b[c] = params.shift[c] - a[c] * params.running_mean[c];
    }
    for (std::size_t t = 0; t < length; ++t) {
      const T* x = input.raw() + t * channels;
      T* y = output.raw() + t * channels;
      for (std::size_t c = 0; c < channels; ++c) y[c] = a[c] * x[c] + b[c];
    }
    return output;
  }

  if (length < 2) {
    throw NumericalError("batchnorm: training mode needs at least 2 timesteps, got " +
                         std::to_string(length));
  }
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    const T* x = input.raw() + t * channels;
    for (std::size_t c = 0; c < channels; ++c) sum[c] += x[c];
  }
  std::vector<T> mean(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    mean[c] = static_cast<T>(sum[c] / static_cast<double>(length));
  }
  for (std::size_t t = 0; t < length; ++t) {
    const T* x = input.raw() + t * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = static_cast<double>(x[c]) - static_cast<double>(mean[c]);
      sq[c] += d * d;
    }
  }
  std::vector<T> inv_std(channels), var(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    var[c] = static_cast<T>(sq[c] / static_cast<double>(length));
    inv_std[c] = T(1) / std::sqrt(var[c] + params.epsilon);
  }

  Tensor<T> normalized(length, channels);
  for (std::size_t t = 0; t < length; ++t) {
    const T* x = input.raw() + t * channels;
    T* xh = normalized.raw() + t * channels;
    T* y = output.raw() + t * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      xh[c] = (x[c] - mean[c]) * inv_std[c];
      y[c] = params.scale[c] * xh[c] + params.shift[c];
    }
  }
  const T m = params.momentum;
  for (std::size_t c = 0; c < channels; ++c) {
    params.running_mean[c] = m * params.running_mean[c] + (T(1) - m) * mean[c];
    params.running_var[c] = m * params.running_var[c] + (T(1) - m) * var[c];
  }
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return output;
}

template <typename T>
BatchNormGradients<T> batchnorm_backward(const BatchNormCache<T>& cache,
                                         const BatchNormParams<T>& params,
                                         const Tensor<T>& grad_out) {
  const Tensor<T>& xhat = cache.normalized;
  if (!xhat.same_shape(grad_out)) {
    throw ConfigError("batchnorm_backward: grad_out shape " +
                      shape_string(grad_out) + " does not match " +
                      shape_string(xhat));
  }
  const std::size_t channels = xhat.channels();
  const std::size_t length = xhat.length();
  BatchNormGradients<T> grads;
  grads.scale.assign(channels, T(0));
  grads.shift.assign(channels, T(0));
  grads.input = Tensor<T>(length, channels);

  std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    const T* dy = grad_out.raw() + t * channels;
    const T* xh = xhat.raw() + t * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      sum_dy[c] += dy[c];
      sum_dy_xhat[c] += static_cast<double>(dy[c]) * xh[c];
    }
  }
  const T n = static_cast<T>(length);
  std::vector<T> mean_dy(channels), mean_dy_xhat(channels), k(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    grads.shift[c] = static_cast<T>(sum_dy[c]);
    grads.scale[c] = static_cast<T>(sum_dy_xhat[c]);
    mean_dy[c] = static_cast<T>(sum_dy[c]) / n;
    mean_dy_xhat[c] = static_cast<T>(sum_dy_xhat[c]) / n;
    k[c] = params.scale[c] * cache.inv_std[c];
  }
  for (std::size_t t = 0; t < length; ++t) {
    const T* dy = grad_out.raw() + t * channels;
    const T* xh = xhat.raw() + t * channels;
    T* dx = grads.input.raw() + t * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      dx[c] = k[c] * (dy[c] - mean_dy[c] - xh[c] * mean_dy_xhat[c]);
    }
  }
  return grads;
}

template <typename T>
BatchNormGradients<T> batchnorm_infer_backward(const Tensor<T>& input,
                                               const BatchNormParams<T>& params,
                                               const Tensor<T>& grad_out) {
  if (!input.same_shape(grad_out)) {
    throw ConfigError("batchnorm_infer_backward: shape mismatch");
  }
  const std::size_t channels = input.channels();
  BatchNormGradients<T> grads;
  grads.scale.assign(channels, T(0));
  grads.shift.assign(channels, T(0));
  grads.input = Tensor<T>(input.length(), channels);
  std::vector<T> inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    inv_std[c] = T(1) / std::sqrt(params.running_var[c] + params.epsilon);
  }
  for (std::size_t t = 0; t < input.length(); ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const T dy = grad_out(t, c);
      const T xhat = (input(t, c) - params.running_mean[c]) * inv_std[c];
      grads.shift[c] += dy;
      grads.scale[c] += dy * xhat;
      grads.input(t, c) = dy * params.scale[c] * inv_std[c];
    }
  }
  return grads;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out(input.length(), input.channels());
  const T* x = input.raw();
  T* y = out.raw();
  for (std::size_t i = 0; i < input.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
  if (!input.same_shape(grad_out)) throw ConfigError("relu_backward: shape mismatch");
  Tensor<T> out(input.length(), input.channels());
  const T* x = input.raw();
  const T* g = grad_out.raw();
  T* y = out.raw();
  for (std::size_t i = 0; i < input.size(); ++i) y[i] = x[i] > T(0) ? g[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input) {
  Tensor<T> out(input.length(), input.channels());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T x = input.raw()[i];
    out.raw()[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                             : std::exp(x) / (T(1) + std::exp(x));
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  if (!output.same_shape(grad_out)) {
    throw ConfigError("sigmoid_backward: shape mismatch");
  }
  Tensor<T> out(output.length(), output.channels());
  for (std::size_t i = 0; i < output.size(); ++i) {
    const T s = output.raw()[i];
    out.raw()[i] = grad_out.raw()[i] * s * (T(1) - s);
  }
  return out;
}

std::size_t PoolGeometry::output_length(std::size_t input_length) const {
  const std::size_t padded = input_length + pad_left + pad_right;
  if (padded < size) return 0;
  return (padded - size) / stride + 1;
}

void PoolGeometry::validate() const {
  if (size < 1 || stride < 1) throw ConfigError("pool: size and stride must be >= 1");
  if (pad_left >= size || pad_right >= size) {
    throw ConfigError("pool: padding must be smaller than the window");
  }
}

template <typename T>
MaxPoolResult<T> maxpool1d_forward(const Tensor<T>& input,
                                   const PoolGeometry& geometry) {
  geometry.validate();
  const std::size_t channels = input.channels();
  const std::size_t out_length = geometry.output_length(input.length());
  MaxPoolResult<T> result;
  result.output = Tensor<T>(out_length, channels);
  result.argmax.assign(out_length * channels, 0);
  const auto in_length = static_cast<std::ptrdiff_t>(input.length());
  for (std::size_t t = 0; t < out_length; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * geometry.stride) -
                       static_cast<std::ptrdiff_t>(geometry.pad_left);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(start, 0);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(
        start + static_cast<std::ptrdiff_t>(geometry.size), in_length);
    for (std::size_t c = 0; c < channels; ++c) {
      T best = -std::numeric_limits<T>::infinity();
      std::size_t best_index = static_cast<std::size_t>(lo) * channels + c;
      for (std::ptrdiff_t s = lo; s < hi; ++s) {
        const std::size_t idx = static_cast<std::size_t>(s) * channels + c;
        if (input.raw()[idx] > best) {
          best = input.raw()[idx];
          best_index = idx;
        }
      }
      result.output(t, c) = best;
      result.argmax[t * channels + c] = best_index;
    }
  }
  return result;
}

template <typename T>
Tensor<T> maxpool1d_backward(std::size_t input_length, std::size_t channels,
                             std::span<const std::size_t> argmax,
                             const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.size() || grad_out.channels() != channels) {
    throw ConfigError("maxpool1d_backward: argmax/grad_out shape mismatch");
  }
  Tensor<T> grad_in(input_length, channels);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    grad_in.raw()[argmax[i]] += grad_out.raw()[i];
  }
  return grad_in;
}

template <typename T>
Tensor<T> avgpool1d_forward(const Tensor<T>& input,
                            const PoolGeometry& geometry) {
  geometry.validate();
  const std::size_t channels = input.channels();
  const std::size_t out_length = geometry.output_length(input.length());
  Tensor<T> out(out_length, channels);
  const T scale = T(1) / static_cast<T>(geometry.size);
  const auto in_length = static_cast<std::ptrdiff_t>(input.length());
  for (std::size_t t = 0; t < out_length; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * geometry.stride) -
                       static_cast<std::ptrdiff_t>(geometry.pad_left);
    T* y = out.raw() + t * channels;
    for (std::size_t k = 0; k < geometry.size; ++k) {
      const std::ptrdiff_t s = start + static_cast<std::ptrdiff_t>(k);
      if (s < 0 || s >= in_length) continue;
      const T* x = input.raw() + s * channels;
      for (std::size_t c = 0; c < channels; ++c) y[c] += x[c];
    }
    for (std::size_t c = 0; c < channels; ++c) y[c] *= scale;
  }
  return out;
}

template <typename T>
Tensor<T> avgpool1d_backward(std::size_t input_length,
                             const PoolGeometry& geometry,
                             const Tensor<T>& grad_out) {
  const std::size_t channels = grad_out.channels();
  if (grad_out.length() != geometry.output_length(input_length)) {
    throw ConfigError("avgpool1d_backward: grad_out length mismatch");
  }
  Tensor<T> grad_in(input_length, channels);
  const T scale = T(1) / static_cast<T>(geometry.size);
  const auto in_length = static_cast<std::ptrdiff_t>(input_length);
  for (std::size_t t = 0; t < grad_out.length(); ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * geometry.stride) -
                       static_cast<std::ptrdiff_t>(geometry.pad_left);
    const T* g = grad_out.raw() + t * channels;
    for (std::size_t k = 0; k < geometry.size; ++k) {
      const std::ptrdiff_t s = start + static_cast<std::ptrdiff_t>(k);
      if (s < 0 || s >= in_length) continue;
      T* x = grad_in.raw() + s * channels;
      for (std::size_t c = 0; c < channels; ++c) x[c] += g[c] * scale;
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> inputs) {
  if (inputs.empty()) return {};
  const std::size_t length = inputs.front()->length();
  std::size_t channels = 0;
  for (const Tensor<T>* in : inputs) {
    if (in->length() != length) {
      throw ConfigError("concat_channels: length mismatch " +
                        std::to_string(in->length()) + " vs " +
                        std::to_string(length));
    }
    channels += in->channels();
  }
  Tensor<T> out(length, channels);
  for (std::size_t t = 0; t < length; ++t) {
    T* dst = out.raw() + t * channels;
    for (const Tensor<T>* in : inputs) {
      const std::size_t c = in->channels();
      std::memcpy(dst, in->raw() + t * c, c * sizeof(T));
      dst += c;
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& input,
                                      std::span<const std::size_t> widths) {
  std::size_t total = 0;
  for (std::size_t w : widths) total += w;
  if (total != input.channels()) {
    throw ConfigError("split_channels: widths sum to " + std::to_string(total) +
                      ", tensor has " + std::to_string(input.channels()) +
                      " channels");
  }
  std::vector<Tensor<T>> parts;
  parts.reserve(widths.size());
  for (std::size_t w : widths) parts.emplace_back(input.length(), w);
  const std::size_t channels = input.channels();
  for (std::size_t t = 0; t < input.length(); ++t) {
    const T* src = input.raw() + t * channels;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      std::memcpy(parts[i].raw() + t * widths[i], src, widths[i] * sizeof(T));
      src += widths[i];
    }
  }
  return parts;
}

#define CCRCNN_INSTANTIATE_LAYERS(T)                                           \
  template struct ConvParams<T>;                                               \
  template struct BatchNormParams<T>;                                          \
  template Tensor<T> conv1d_forward(const Tensor<T>&, const ConvParams<T>&,    \
                                    std::size_t);                              \
  template ConvGradients<T> conv1d_backward(                                   \
      const Tensor<T>&, const ConvParams<T>&, const Tensor<T>&, std::size_t);  \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, BatchNormParams<T>&,  \
                                       Mode, BatchNormCache<T>*);              \
  template BatchNormGradients<T> batchnorm_backward(                           \
      const BatchNormCache<T>&, const BatchNormParams<T>&, const Tensor<T>&);  \
  template BatchNormGradients<T> batchnorm_infer_backward(                     \
      const Tensor<T>&, const BatchNormParams<T>&, const Tensor<T>&);          \
  template Tensor<T> relu_forward(const Tensor<T>&);                           \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> sigmoid_forward(const Tensor<T>&);                        \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);     \
  template MaxPoolResult<T> maxpool1d_forward(const Tensor<T>&,                \
                                              const PoolGeometry&);            \
  template Tensor<T> maxpool1d_backward(std::size_t, std::size_t,              \
                                        std::span<const std::size_t>,          \
                                        const Tensor<T>&);                     \
  template Tensor<T> avgpool1d_forward(const Tensor<T>&, const PoolGeometry&); \
  template Tensor<T> avgpool1d_backward(std::size_t, const PoolGeometry&,      \
                                        const Tensor<T>&);                     \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);       \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&,             \
                                                 std::span<const std::size_t>);

CCRCNN_INSTANTIATE_LAYERS(float)
CCRCNN_INSTANTIATE_LAYERS(double)

#undef CCRCNN_INSTANTIATE_LAYERS

}  // namespace ccrcnn::nn
