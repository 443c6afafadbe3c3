#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ccrcnn/nn/layers.hpp"
#include "ccrcnn/nn/module.hpp"

namespace ccrcnn::nn {

// Records a forward computation as a list of nodes so it can be replayed in
// reverse. A tape is built per forward pass and thrown away afterwards;
// layers accumulate their parameter gradients into their own buffers.
template <typename T>
class Tape {
 public:
  using Id = std::size_t;
  using Backward = std::function<void(Tape&, Id)>;

  explicit Tape(Mode mode = Mode::kTrain) : mode_(mode) {}

  Mode mode() const { return mode_; }
  bool recording() const { return mode_ == Mode::kTrain || force_record_; }
  // Keep backward closures in inference mode too (BN uses running stats).
  void set_record(bool on) { force_record_ = on; }

  // Activation pattern hashing, used by the gradient checker to notice
  // finite-difference probes that cross a kink (ReLU, max-pool argmax, ...).
  void set_track_signature(bool on) { track_signature_ = on; }
  bool tracking_signature() const { return track_signature_; }
  std::uint64_t signature() const { return signature_; }
  void mix_signature(std::uint64_t bits);

  Id constant(Tensor<T> value);
  // A leaf whose gradient is accumulated into `ref.grad` during backward.
  Id input(Tensor<T> value, std::span<T> grad_sink);

  Id conv(Id x, Conv1d<T>& layer);
  Id batchnorm(Id x, BatchNorm1d<T>& layer);
  Id relu(Id x);
  Id sigmoid(Id x);
  Id maxpool(Id x, const PoolGeometry& geometry);
  Id avgpool(Id x, const PoolGeometry& geometry);
  Id concat(std::span<const Id> xs);
  // Stacks along the timestep axis; all inputs share the channel count.
  Id concat_time(std::span<const Id> xs);
  // Rows [begin, begin + length) of x.
  Id slice_time(Id x, std::size_t begin, std::size_t length);

  // Appends an arbitrary node. `backward` reads grad(self) and adds into the
  // gradients of the parents.
  Id custom(Tensor<T> value, std::vector<Id> parents, Backward backward);

  const Tensor<T>& value(Id id) const { return nodes_[id].value; }
  Tensor<T>& grad(Id id);
  bool needs_grad(Id id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds grad(output) and runs every recorded backward in reverse order.
  void backward(Id output, const Tensor<T>& seed);
  void backward(Id output);  // seed of ones

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    Backward backward;
  };

  Id push(Tensor<T> value, bool needs_grad, Backward backward);
  bool any_needs_grad(std::span<const Id> ids) const;
  void accumulate(Id id, const Tensor<T>& delta);

  Mode mode_;
  bool force_record_ = false;
  bool track_signature_ = false;
  std::uint64_t signature_ = 1469598103934665603ull;
  std::vector<Node> nodes_;
};

}  // namespace ccrcnn::nn
