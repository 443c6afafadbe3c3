#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccrcnn/errors.hpp"

namespace ccrcnn::nn {

// Dense (length x channels) array stored timestep-major: element (t, c) lives
// at t * channels + c. The optional gradient buffer always mirrors the shape.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t length, std::size_t channels, T fill = T(0))
      : length_(length), channels_(channels), data_(length * channels, fill) {}
  Tensor(std::size_t length, std::size_t channels, std::vector<T> data)
      : length_(length), channels_(channels), data_(std::move(data)) {
    if (data_.size() != length_ * channels_) {
      throw ConfigError("tensor data size " + std::to_string(data_.size()) +
                        " does not match shape " + std::to_string(length_) +
                        "x" + std::to_string(channels_));
    }
  }

  std::size_t length() const { return length_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t t, std::size_t c) { return data_[t * channels_ + c]; }
  T operator()(std::size_t t, std::size_t c) const {
    return data_[t * channels_ + c];
  }

  std::span<T> row(std::size_t t) {
    return {data_.data() + t * channels_, channels_};
  }
  std::span<const T> row(std::size_t t) const {
    return {data_.data() + t * channels_, channels_};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  bool has_grad() const { return grad_.size() == data_.size() && !data_.empty(); }
  std::vector<T>& grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), T(0));
    return grad_;
  }
  const std::vector<T>& grad() const { return grad_; }
  void zero_grad() { grad_.assign(data_.size(), T(0)); }
  void drop_grad() { grad_.clear(); }

  bool same_shape(const Tensor& other) const {
    return length_ == other.length_ && channels_ == other.channels_;
  }

 private:
  std::size_t length_ = 0;
  std::size_t channels_ = 0;
  std::vector<T> data_;
  std::vector<T> grad_;
};

inline std::string shape_string(std::size_t length, std::size_t channels) {
  return "(" + std::to_string(length) + " x " + std::to_string(channels) + ")";
}

template <typename T>
std::string shape_string(const Tensor<T>& t) {
  return shape_string(t.length(), t.channels());
}

// A named view of a parameter (or persistent buffer) owned by some layer.
// Optimizers, checkpoints and the gradient checker address parameters only
// through these views.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<T> value;
  std::span<T> grad;  // empty for non-trainable buffers
  bool trainable() const { return !grad.empty(); }
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

}  // namespace ccrcnn::nn
