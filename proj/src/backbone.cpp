#include "ccrcnn/backbone.hpp"

#include <numeric>

#include "ccrcnn/errors.hpp"

namespace ccrcnn {

BackboneConfig BackboneConfig::full() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::desk() {
  BackboneConfig c;
  c.stem_channels = 16;
  c.growth_rates = {8, 8, 8, 8, 8};
  c.layers_per_block = 4;
  c.num_scales = 3;
  c.transition_compress = {0, 32, 32, 32};
  c.proposal_feature_dim = 64;
  return c;
}

std::vector<StageShape> stage_ledger(const BackboneConfig& config) {
  std::vector<StageShape> rows;
  rows.push_back({"conv", 2, config.stem_channels});
  rows.push_back({"pool", 4, config.stem_channels});
  std::size_t channels = config.stem_channels;
  std::size_t divisor = 4;
  for (std::size_t b = 0; b < config.num_blocks(); ++b) {
    channels = dense_block_channels(channels, config.growth_rates[b],
                                    config.layers_per_block);
    rows.push_back({"D" + std::to_string(b + 1), divisor, channels});
    if (b + 1 == config.num_blocks()) break;
    if (config.transition_compress[b] != 0) channels = config.transition_compress[b];
    divisor *= 2;
    rows.push_back({"T" + std::to_string(b + 1), divisor, channels});
  }
  return rows;
}

void BackboneConfig::validate() const {
  if (growth_rates.empty()) throw ConfigError("backbone: no dense blocks");
  if (stem_channels == 0 || stem_kernel == 0 || stem_kernel % 2 == 0) {
    throw ConfigError("backbone: stem needs channels > 0 and an odd kernel");
  }
  if (transition_compress.size() + 1 != growth_rates.size()) {
    throw ConfigError("backbone: expected " +
                      std::to_string(growth_rates.size() - 1) +
                      " transitions, got " +
                      std::to_string(transition_compress.size()));
  }
  // Two non-detection blocks put the first detection stage at stride 16.
  if (num_scales == 0 || num_scales + 2 != growth_rates.size()) {
    throw ConfigError("backbone: detection stages must be the last " +
                      std::to_string(num_scales) + " of " +
                      std::to_string(num_scales + 2) + " blocks");
  }
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0) || !(bn_epsilon > 0.0)) {
    throw ConfigError("backbone: BN momentum must be in (0,1), epsilon > 0");
  }
  const auto rows = stage_ledger(*this);
  for (std::size_t s = 0; s < num_scales; ++s) {
    const std::string name = "D" + std::to_string(block_of_scale(s) + 1);
    for (const auto& r : rows) {
      if (r.name == name && r.channels != proposal_feature_dim) {
        throw ConfigError("backbone: detection stage " + name + " emits " +
                          std::to_string(r.channels) + " channels, expected " +
                          std::to_string(proposal_feature_dim));
      }
    }
  }
}

nn::PoolGeometry transition_pool(std::size_t input_length) {
  return nn::PoolGeometry{2, 2, 0, input_length % 2};
}

// ---------------------------------------------------------------- DenseBlock

template <typename T>
DenseBlock<T>::DenseBlock(std::string name, std::size_t in_channels,
                          std::size_t k, std::size_t layers,
                          double bn_momentum, double bn_epsilon)
    : out_channels_(dense_block_channels(in_channels, k, layers)) {
  if (k == 0) layers = 0;
  bns_.reserve(layers);
  convs_.reserve(layers);
  std::size_t c = in_channels;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string prefix = name + ".layer" + std::to_string(l);
    bns_.emplace_back(prefix + ".bn", c, static_cast<T>(bn_momentum),
                      static_cast<T>(bn_epsilon));
    convs_.emplace_back(prefix + ".conv", 3, c, k, 1, 1,
                        nn::Conv1d<T>::same_padding(3, 1));
    c += k;
  }
}

template <typename T>
void DenseBlock<T>::init(std::mt19937_64& rng) {
  for (auto& conv : convs_) conv.init_fan_in(rng);
}

template <typename T>
typename nn::Tape<T>::Id DenseBlock<T>::forward(nn::Tape<T>& tape,
                                                typename nn::Tape<T>::Id x) {
  using Id = typename nn::Tape<T>::Id;
  Id running = x;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    Id h = tape.batchnorm(running, bns_[l]);
    h = tape.relu(h);
    h = tape.conv(h, convs_[l]);
    const Id parts[2] = {running, h};
    running = tape.concat(parts);
  }
  return running;
}

template <typename T>
std::size_t DenseBlock<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : bns_) n += b.parameter_count();
  for (const auto& c : convs_) n += c.parameter_count();
  return n;
}

template <typename T>
void DenseBlock<T>::collect(nn::ParamCollector<T>& out) {
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    bns_[l].collect(out);
    convs_[l].collect(out);
  }
}

// ----------------------------------------------------------- TransitionLayer

template <typename T>
TransitionLayer<T>::TransitionLayer(std::string name, std::size_t in_channels,
                                    std::size_t compress_to,
                                    double bn_momentum, double bn_epsilon)
    : in_channels_(in_channels), compress_to_(compress_to) {
  if (compress_to_ != 0) {
    bn_ = nn::BatchNorm1d<T>(name + ".bn", in_channels,
                             static_cast<T>(bn_momentum),
                             static_cast<T>(bn_epsilon));
    conv_ = nn::Conv1d<T>(name + ".conv", 1, in_channels, compress_to);
  }
}

template <typename T>
void TransitionLayer<T>::init(std::mt19937_64& rng) {
  if (compress_to_ != 0) conv_.init_fan_in(rng);
}

template <typename T>
typename nn::Tape<T>::Id TransitionLayer<T>::forward(
    nn::Tape<T>& tape, typename nn::Tape<T>::Id x) {
  if (compress_to_ != 0) {
    x = tape.batchnorm(x, bn_);
    x = tape.relu(x);
    x = tape.conv(x, conv_);
  }
  return tape.avgpool(x, transition_pool(tape.value(x).length()));
}

template <typename T>
std::size_t TransitionLayer<T>::out_channels() const {
  return compress_to_ != 0 ? compress_to_ : in_channels_;
}

template <typename T>
std::size_t TransitionLayer<T>::parameter_count() const {
  return compress_to_ != 0 ? bn_.parameter_count() + conv_.parameter_count() : 0;
}

template <typename T>
void TransitionLayer<T>::collect(nn::ParamCollector<T>& out) {
  if (compress_to_ == 0) return;
  bn_.collect(out);
  conv_.collect(out);
}

// ------------------------------------------------------------------ Backbone

template <typename T>
Backbone<T>::Backbone(BackboneConfig config) : config_(std::move(config)) {
  config_.validate();
  const T momentum = static_cast<T>(config_.bn_momentum);
  const T eps = static_cast<T>(config_.bn_epsilon);
  stem_ = nn::Conv1d<T>("stem.conv", config_.stem_kernel, 1,
                        config_.stem_channels, 2, 1, config_.stem_kernel / 2);
  stem_bn_ = nn::BatchNorm1d<T>("stem.bn", config_.stem_channels, momentum, eps);
  std::size_t channels = config_.stem_channels;
  for (std::size_t b = 0; b < config_.num_blocks(); ++b) {
    blocks_.push_back(std::make_unique<DenseBlock<T>>(
        "D" + std::to_string(b + 1), channels, config_.growth_rates[b],
        config_.layers_per_block, config_.bn_momentum, config_.bn_epsilon));
    channels = blocks_.back()->out_channels();
    if (b + 1 == config_.num_blocks()) break;
    transitions_.push_back(std::make_unique<TransitionLayer<T>>(
        "T" + std::to_string(b + 1), channels, config_.transition_compress[b],
        config_.bn_momentum, config_.bn_epsilon));
    channels = transitions_.back()->out_channels();
  }
}

template <typename T>
void Backbone<T>::init(std::mt19937_64& rng) {
  stem_.init_fan_in(rng);
  for (auto& b : blocks_) b->init(rng);
  for (auto& t : transitions_) t->init(rng);
}

template <typename T>
std::vector<typename Backbone<T>::Id> Backbone<T>::forward(
    nn::Tape<T>& tape, Id input, std::size_t scales_needed) {
  const auto& x = tape.value(input);
  const std::size_t multiple = config_.largest_stride();
  if (x.channels() != 1) {
    throw ConfigError("backbone: expected a single-channel input, got " +
                      nn::shape_string(x));
  }
  if (x.length() == 0 || x.length() % multiple != 0) {
    throw ConfigError("backbone: input length " + std::to_string(x.length()) +
                      " is not a positive multiple of " +
                      std::to_string(multiple));
  }
  if (scales_needed > config_.num_scales) {
    throw ConfigError("backbone: asked for " + std::to_string(scales_needed) +
                      " scales, config has " +
                      std::to_string(config_.num_scales));
  }
  std::vector<Id> features;
  if (scales_needed == 0) return features;
  Id h = tape.conv(input, stem_);
  h = tape.batchnorm(h, stem_bn_);
  h = tape.relu(h);
  h = tape.maxpool(h, nn::PoolGeometry{3, 2, 1, 1});
  const std::size_t last_block = config_.block_of_scale(scales_needed - 1);
  const std::size_t first_scale_block = config_.block_of_scale(0);
  for (std::size_t b = 0; b <= last_block; ++b) {
    h = blocks_[b]->forward(tape, h);
    if (b >= first_scale_block) features.push_back(h);
    if (b < last_block) h = transitions_[b]->forward(tape, h);
  }
  return features;
}

template <typename T>
void Backbone<T>::collect(nn::ParamCollector<T>& out) {
  stem_.collect(out);
  stem_bn_.collect(out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b]->collect(out);
    if (b < transitions_.size()) transitions_[b]->collect(out);
  }
}

template <typename T>
std::size_t Backbone<T>::parameter_count() const {
  std::size_t n = stem_.parameter_count() + stem_bn_.parameter_count();
  for (const auto& b : blocks_) n += b->parameter_count();
  for (const auto& t : transitions_) n += t->parameter_count();
  return n;
}

template class DenseBlock<float>;
template class DenseBlock<double>;
template class TransitionLayer<float>;
template class TransitionLayer<double>;
template class Backbone<float>;
template class Backbone<double>;

}  // namespace ccrcnn
