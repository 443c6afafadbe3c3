#pragma once

// The assembled detector and its checkpoint format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "ccrcnn/backbone.hpp"
#include "ccrcnn/dethead.hpp"

namespace ccrcnn {

struct ModelConfig {
  BackboneConfig backbone = BackboneConfig::full();
  HeadConfig head = HeadConfig::full();
  LossParams loss;
  std::size_t segment_length = 24576;
  double overlap = 0.5;

  static ModelConfig full();
  static ModelConfig desk();

  std::size_t num_scales() const { return backbone.num_scales; }
  std::size_t first_active_scale() const { return head.first_scale; }
  std::size_t end_active_scale() const { return head.scale_end(num_scales()); }
  void validate() const;
};

template <typename T>
class Detector {
 public:
  using Id = typename nn::Tape<T>::Id;

  explicit Detector(ModelConfig config);
  Detector(const Detector&) = delete;
  Detector& operator=(const Detector&) = delete;

  const ModelConfig& config() const { return config_; }

  // He init for convolutions, N(0, 0.01) for the sibling heads.
  void init(std::uint64_t seed);

  // Head outputs for the active scales stacked along the timestep axis:
  // rows [row_offset[i], row_offset[i] + lengths[i]) belong to scales[i].
  struct Outputs {
    std::vector<std::size_t> scales;
    std::vector<std::size_t> row_offset;
    std::vector<std::size_t> lengths;
    Id logits = 0;   // rows x 1
    Id offsets = 0;  // rows x 2
  };
  Outputs forward(nn::Tape<T>& tape, Id input);

  // Inference-mode forward of one normalised segment.
  std::vector<ScalePrediction> predict(std::span<const float> segment);
  // predict() followed by thresholding, decoding and NMS, in segment
  // coordinates.
  std::vector<Detection> detect_segment(std::span<const float> segment);

  nn::ParamCollector<T> parameters();
  std::size_t parameter_count() const;

  Backbone<T>& backbone() { return *backbone_; }
  ContextualBlock<T>* context() { return context_.get(); }
  SiblingHeads<T>& heads() { return *heads_; }

 private:
  ModelConfig config_;
  std::unique_ptr<Backbone<T>> backbone_;
  std::unique_ptr<ContextualBlock<T>> context_;
  std::unique_ptr<SiblingHeads<T>> heads_;
};

// Binary checkpoint: "CCR1", u32 version, u32 array count, then per array
// u32 name length, name bytes, u32 rank, rank x u32 dims and the values as
// little-endian float32. Buffers (BN running statistics) are included.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const nn::ParamCollector<float>& params);
// Loads every array by name into `params`. Throws DataError on bad magic,
// truncation, unknown or missing names and shape mismatches.
void load_checkpoint(const std::filesystem::path& path,
                     nn::ParamCollector<float>& params);

}  // namespace ccrcnn
