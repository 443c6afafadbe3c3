#include "ccrcnn/nn/tape.hpp"

#include <algorithm>
#include <memory>
#include <string>
#include <utility>

namespace ccrcnn::nn {
namespace {

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t bits) {
  h ^= bits;
  h *= 1099511628211ull;
  return h;
}

}  // namespace

template <typename T>
void Tape<T>::mix_signature(std::uint64_t bits) {
  signature_ = fnv_mix(signature_, bits);
}

template <typename T>
typename Tape<T>::Id Tape<T>::push(Tensor<T> value, bool needs_grad,
                                   Backward backward) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad && recording();
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

template <typename T>
bool Tape<T>::any_needs_grad(std::span<const Id> ids) const {
  for (Id id : ids) {
    if (nodes_[id].needs_grad) return true;
  }
  return false;
}

template <typename T>
Tensor<T>& Tape<T>::grad(Id id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value) || n.grad.size() != n.value.size()) {
    n.grad = Tensor<T>(n.value.length(), n.value.channels());
  }
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate(Id id, const Tensor<T>& delta) {
  if (!nodes_[id].needs_grad) return;
  Tensor<T>& g = grad(id);
  T* dst = g.raw();
  const T* src = delta.raw();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

template <typename T>
typename Tape<T>::Id Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false, {});
}

template <typename T>
typename Tape<T>::Id Tape<T>::input(Tensor<T> value, std::span<T> grad_sink) {
  if (grad_sink.size() != value.size()) {
    throw ConfigError("tape input: gradient sink size mismatch");
  }
  return push(std::move(value), true, [grad_sink](Tape& tape, Id self) {
    const Tensor<T>& g = tape.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) grad_sink[i] += g.raw()[i];
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::conv(Id x, Conv1d<T>& layer) {
  Tensor<T> out = conv1d_forward(value(x), layer.params(), layer.padding());
  return push(std::move(out), true, [x, &layer](Tape& tape, Id self) {
    ConvGradients<T> g = conv1d_backward(tape.value(x), layer.params(),
                                         tape.grad(self), layer.padding());
    auto& wg = layer.weight_grad();
    auto& bg = layer.bias_grad();
    for (std::size_t i = 0; i < wg.size(); ++i) wg[i] += g.weights[i];
    for (std::size_t i = 0; i < bg.size(); ++i) bg[i] += g.bias[i];
    tape.accumulate(x, g.input);
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::batchnorm(Id x, BatchNorm1d<T>& layer) {
  auto apply = [&layer](BatchNormGradients<T>& g) {
    auto& sg = layer.scale_grad();
    auto& hg = layer.shift_grad();
    for (std::size_t i = 0; i < sg.size(); ++i) sg[i] += g.scale[i];
    for (std::size_t i = 0; i < hg.size(); ++i) hg[i] += g.shift[i];
  };
  if (mode_ == Mode::kInfer) {
    Tensor<T> out = batchnorm_forward(value(x), layer.params(), Mode::kInfer);
    return push(std::move(out), true, [x, &layer, apply](Tape& tape, Id self) {
      BatchNormGradients<T> g =
          batchnorm_infer_backward(tape.value(x), layer.params(), tape.grad(self));
      apply(g);
      tape.accumulate(x, g.input);
    });
  }
  auto cache = std::make_shared<BatchNormCache<T>>();
  Tensor<T> out =
      batchnorm_forward(value(x), layer.params(), Mode::kTrain, cache.get());
  return push(std::move(out), true,
              [x, &layer, cache, apply](Tape& tape, Id self) {
                BatchNormGradients<T> g =
                    batchnorm_backward(*cache, layer.params(), tape.grad(self));
                apply(g);
                tape.accumulate(x, g.input);
              });
}

template <typename T>
typename Tape<T>::Id Tape<T>::relu(Id x) {
  const Tensor<T>& in = value(x);
  if (track_signature_) {
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      h = fnv_mix(h, (in.raw()[i] > T(0) ? 1u : 2u) + (i << 2));
    }
    mix_signature(h);
  }
  Tensor<T> out = relu_forward(in);
  const bool ng = nodes_[x].needs_grad;
  return push(std::move(out), ng, [x](Tape& tape, Id self) {
    tape.accumulate(x, relu_backward(tape.value(x), tape.grad(self)));
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::sigmoid(Id x) {
  Tensor<T> out = sigmoid_forward(value(x));
  const bool ng = nodes_[x].needs_grad;
  return push(std::move(out), ng, [x](Tape& tape, Id self) {
    tape.accumulate(x, sigmoid_backward(tape.value(self), tape.grad(self)));
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::maxpool(Id x, const PoolGeometry& geometry) {
  MaxPoolResult<T> r = maxpool1d_forward(value(x), geometry);
  if (track_signature_) {
    std::uint64_t h = 0;
    for (std::size_t idx : r.argmax) h = fnv_mix(h, idx);
    mix_signature(h);
  }
  const std::size_t in_length = value(x).length();
  const std::size_t channels = value(x).channels();
  auto argmax = std::make_shared<std::vector<std::size_t>>(std::move(r.argmax));
  const bool ng = nodes_[x].needs_grad;
  return push(std::move(r.output), ng,
              [x, argmax, in_length, channels](Tape& tape, Id self) {
                tape.accumulate(x, maxpool1d_backward(in_length, channels,
                                                      *argmax, tape.grad(self)));
              });
}

template <typename T>
typename Tape<T>::Id Tape<T>::avgpool(Id x, const PoolGeometry& geometry) {
  Tensor<T> out = avgpool1d_forward(value(x), geometry);
  const std::size_t in_length = value(x).length();
  const bool ng = nodes_[x].needs_grad;
  return push(std::move(out), ng, [x, geometry, in_length](Tape& tape, Id self) {
    tape.accumulate(x, avgpool1d_backward(in_length, geometry, tape.grad(self)));
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::concat(std::span<const Id> xs) {
  std::vector<const Tensor<T>*> parts;
  std::vector<std::size_t> widths;
  parts.reserve(xs.size());
  for (Id id : xs) {
    parts.push_back(&value(id));
    widths.push_back(value(id).channels());
  }
  Tensor<T> out = concat_channels<T>(parts);
  std::vector<Id> ids(xs.begin(), xs.end());
  const bool ng = any_needs_grad(xs);
  return push(std::move(out), ng, [ids, widths](Tape& tape, Id self) {
    std::vector<Tensor<T>> pieces = split_channels(tape.grad(self), widths);
    for (std::size_t i = 0; i < ids.size(); ++i) tape.accumulate(ids[i], pieces[i]);
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::concat_time(std::span<const Id> xs) {
  if (xs.empty()) throw ConfigError("concat_time: no inputs");
  const std::size_t channels = value(xs[0]).channels();
  std::size_t length = 0;
  for (Id id : xs) {
    if (value(id).channels() != channels) {
      throw ConfigError("concat_time: channel mismatch " +
                        shape_string(value(xs[0])) + " vs " +
                        shape_string(value(id)));
    }
    length += value(id).length();
  }
  Tensor<T> out(length, channels);
  std::vector<std::size_t> starts;
  std::size_t row = 0;
  for (Id id : xs) {
    const Tensor<T>& v = value(id);
    starts.push_back(row);
    std::copy(v.raw(), v.raw() + v.size(), out.raw() + row * channels);
    row += v.length();
  }
  std::vector<Id> ids(xs.begin(), xs.end());
  const bool ng = any_needs_grad(xs);
  return push(std::move(out), ng, [ids, starts, channels](Tape& tape, Id self) {
    const Tensor<T>& g = tape.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!tape.needs_grad(ids[i])) continue;
      Tensor<T>& dst = tape.grad(ids[i]);
      const T* src = g.raw() + starts[i] * channels;
      for (std::size_t k = 0; k < dst.size(); ++k) dst.raw()[k] += src[k];
    }
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::slice_time(Id x, std::size_t begin,
                                         std::size_t length) {
  const Tensor<T>& v = value(x);
  if (begin + length > v.length()) {
    throw ConfigError("slice_time: rows [" + std::to_string(begin) + ", " +
                      std::to_string(begin + length) + ") outside " +
                      shape_string(v));
  }
  const std::size_t channels = v.channels();
  Tensor<T> out(length, channels);
  std::copy(v.raw() + begin * channels, v.raw() + (begin + length) * channels,
            out.raw());
  const bool ng = nodes_[x].needs_grad;
  return push(std::move(out), ng, [x, begin, channels](Tape& tape, Id self) {
    const Tensor<T>& g = tape.grad(self);
    T* dst = tape.grad(x).raw() + begin * channels;
    for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g.raw()[k];
  });
}

template <typename T>
typename Tape<T>::Id Tape<T>::custom(Tensor<T> value, std::vector<Id> parents,
                                     Backward backward) {
  const bool ng = any_needs_grad(parents);
  return push(std::move(value), ng, std::move(backward));
}

template <typename T>
void Tape<T>::backward(Id output, const Tensor<T>& seed) {
  if (!seed.same_shape(value(output))) {
    throw ConfigError("tape backward: seed shape " + shape_string(seed) +
                      " does not match output " + shape_string(value(output)));
  }
  if (!nodes_[output].needs_grad) return;
  grad(output) = seed;
  for (Id id = output + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.backward || n.grad.size() != n.value.size()) continue;
    n.backward(*this, id);
    // Interior activations are not needed once their gradient has flowed.
    n.grad = Tensor<T>();
  }
}

template <typename T>
void Tape<T>::backward(Id output) {
  const Tensor<T>& v = value(output);
  backward(output, Tensor<T>(v.length(), v.channels(), T(1)));
}

template class Tape<float>;
template class Tape<double>;

}  // namespace ccrcnn::nn
