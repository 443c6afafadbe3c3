#pragma once

// Cascaded densely connected backbone producing the multi-scale proposal
// feature maps.

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ccrcnn/nn/module.hpp"
#include "ccrcnn/nn/tape.hpp"

namespace ccrcnn {

struct BackboneConfig {
  std::size_t stem_channels = 24;
  std::size_t stem_kernel = 7;
  // Growth rate of each dense block D_1..D_n; its length fixes n.
  std::vector<std::size_t> growth_rates{12, 12, 12, 20, 20, 20, 20, 20, 20};
  std::size_t layers_per_block = 6;
  // The last num_scales dense blocks are the detection stages.
  std::size_t num_scales = 7;
  // Output width of the 1x1 convolution of each transition T_1..T_{n-1};
  // 0 means the transition only pools.
  std::vector<std::size_t> transition_compress{0, 0, 120, 120, 120, 120, 120, 120};
  std::size_t proposal_feature_dim = 240;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  // The published nine-block network (seven detection scales, 240-d).
  static BackboneConfig full();
  // Five blocks, three detection scales, growth 8, four layers, 64-d.
  static BackboneConfig desk();

  std::size_t num_blocks() const { return growth_rates.size(); }
  // Index of the dense block feeding detection scale `scale`.
  std::size_t block_of_scale(std::size_t scale) const {
    return num_blocks() - num_scales + scale;
  }
  // Downsampling factor of dense block `block` (D_1 sits at 4).
  static std::size_t block_stride(std::size_t block) { return std::size_t{4} << block; }
  std::size_t scale_stride(std::size_t scale) const {
    return block_stride(block_of_scale(scale));
  }
  std::size_t largest_stride() const { return block_stride(num_blocks() - 1); }

  // Throws ConfigError unless every detection stage emits
  // proposal_feature_dim channels and the arrays are consistent.
  void validate() const;
};

// One row of the stage table: what each stage outputs for an input of
// length L (length = L / divisor).
struct StageShape {
  std::string name;
  std::size_t length_divisor = 1;
  std::size_t channels = 0;
};

// Output shapes of every stage (stem conv, pool, D_i, T_i) in order.
std::vector<StageShape> stage_ledger(const BackboneConfig& config);

// Closed-form channel count after a dense block: d_0 + k * layers.
constexpr std::size_t dense_block_channels(std::size_t in, std::size_t k,
                                           std::size_t layers) {
  return in + k * layers;
}

// Applies dense block semantics to a standalone input: `layers` layers of
// BN-ReLU-conv3 with growth k, each consuming the concatenation of the block
// input and all earlier layer outputs.
template <typename T>
class DenseBlock {
 public:
  DenseBlock(std::string name, std::size_t in_channels, std::size_t k,
             std::size_t layers, double bn_momentum = 0.9,
             double bn_epsilon = 1e-5);
  void init(std::mt19937_64& rng);
  typename nn::Tape<T>::Id forward(nn::Tape<T>& tape,
                                   typename nn::Tape<T>::Id x);
  std::size_t out_channels() const { return out_channels_; }
  std::size_t parameter_count() const;
  void collect(nn::ParamCollector<T>& out);

 private:
  std::vector<nn::BatchNorm1d<T>> bns_;
  std::vector<nn::Conv1d<T>> convs_;
  std::size_t out_channels_;
};

// Optional 1x1 compression (BN-ReLU-conv) followed by average pooling with
// window 2 and stride 2. Odd lengths get one zero sample appended before
// pooling, so the output length is ceil(L / 2).
template <typename T>
class TransitionLayer {
 public:
  TransitionLayer(std::string name, std::size_t in_channels,
                  std::size_t compress_to, double bn_momentum = 0.9,
                  double bn_epsilon = 1e-5);
  void init(std::mt19937_64& rng);
  typename nn::Tape<T>::Id forward(nn::Tape<T>& tape,
                                   typename nn::Tape<T>::Id x);
  std::size_t out_channels() const;
  std::size_t parameter_count() const;
  void collect(nn::ParamCollector<T>& out);

 private:
  std::size_t in_channels_;
  std::size_t compress_to_;
  nn::BatchNorm1d<T> bn_;
  nn::Conv1d<T> conv_;
};

template <typename T>
class Backbone {
 public:
  using Id = typename nn::Tape<T>::Id;

  explicit Backbone(BackboneConfig config);
  Backbone(const Backbone&) = delete;
  Backbone& operator=(const Backbone&) = delete;

  const BackboneConfig& config() const { return config_; }

  void init(std::mt19937_64& rng);

  // Runs the stem and the cascade on a (L x 1) input node. Returns the
  // feature node of every detection scale in [0, scales_needed); blocks past
  // the last needed scale are not evaluated. Throws ConfigError when L is not
  // a multiple of the largest stride.
  std::vector<Id> forward(nn::Tape<T>& tape, Id input,
                          std::size_t scales_needed);
  std::vector<Id> forward(nn::Tape<T>& tape, Id input) {
    return forward(tape, input, config_.num_scales);
  }

  void collect(nn::ParamCollector<T>& out);
  std::size_t parameter_count() const;

 private:
  BackboneConfig config_;
  nn::Conv1d<T> stem_;
  nn::BatchNorm1d<T> stem_bn_;
  std::vector<std::unique_ptr<DenseBlock<T>>> blocks_;
  std::vector<std::unique_ptr<TransitionLayer<T>>> transitions_;
};

// Pooling geometry used by transitions for an input of the given length.
nn::PoolGeometry transition_pool(std::size_t input_length);

}  // namespace ccrcnn
