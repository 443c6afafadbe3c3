#pragma once

// Training loop, validation and split-level evaluation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ccrcnn/dataio.hpp"
#include "ccrcnn/geomeval.hpp"
#include "ccrcnn/model.hpp"
#include "ccrcnn/nn/adam.hpp"

namespace ccrcnn {

struct TrainConfig {
  std::size_t epochs = 20;
  double initial_lr = 5e-4;
  double lr_decay = 0.1;
  std::size_t lr_decay_every = 10;
  // Global gradient-norm clip; 0 disables it.
  double clip_norm = 10.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  // Validate every epoch and keep the best parameters.
  bool validate = true;
  // Where best.ccr, model_config.json and metrics.csv go; empty keeps everything
  // in memory.
  std::filesystem::path out_dir;
  bool verbose = false;

  void validate_config() const;
};

// lr(e) = initial_lr * lr_decay^floor(e / lr_decay_every).
double learning_rate(const TrainConfig& config, std::size_t epoch);

// One training window: normalised samples plus per-scale labels (indexed by
// absolute scale; inactive scales are empty).
struct PreparedSegment {
  std::int64_t offset = 0;
  std::vector<float> samples;
  std::vector<std::vector<ProposalLabel>> labels;
  std::size_t num_events = 0;
};

PreparedSegment prepare_segment(const ModelConfig& config,
                                std::span<const float> waveform,
                                std::span<const Interval> events,
                                std::int64_t offset);

// Every training window of a split.
std::vector<PreparedSegment> prepare_split(const ModelConfig& config,
                                           const Dataset& dataset, Split split);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_map = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_val_map = -1.0;
  double first_step_loss = 0.0;
};

class Trainer {
 public:
  Trainer(Detector<float>& model, TrainConfig config);

  // Forward, proposal sampling and backward for one segment; parameter
  // gradients are left in the model's accumulators (zeroed first).
  JointLoss forward_backward(const PreparedSegment& segment,
                             std::mt19937_64& rng);

  // forward_backward followed by clipping and an Adam update at `lr`.
  // Throws NumericalError (after writing a dump when out_dir is set) if the
  // loss or the gradients are not finite.
  JointLoss step(const PreparedSegment& segment, double lr,
                 std::mt19937_64& rng);

  // Full schedule on the train split, validating on the val split. The
  // model ends up holding the best-by-validation parameters.
  TrainResult fit(const Dataset& dataset);

  const nn::AdamState<float>& optimizer() const { return adam_; }

 private:
  void dump_failure(const PreparedSegment& segment, const std::string& what);

  Detector<float>& model_;
  TrainConfig config_;
  nn::ParamCollector<float> params_;
  nn::AdamState<float> adam_;
};

// Produces detections (segment coordinates) for one normalised window.
using SegmentDetector =
    std::function<std::vector<Detection>(std::span<const float> normalized,
                                         std::int64_t offset)>;

// Runs `detector` over overlapping windows of `region`, keeps each window's
// detections whose centre lies in that window's share of the overlap, maps
// them to waveform coordinates and removes duplicates with a global NMS.
std::vector<Detection> detect_region(std::span<const float> waveform,
                                     Interval region,
                                     std::size_t segment_length, double overlap,
                                     double nms_iou,
                                     const SegmentDetector& detector,
                                     std::size_t threads = 1);

std::vector<Detection> detect_region(Detector<float>& model,
                                     std::span<const float> waveform,
                                     Interval region, std::size_t threads = 1);

EvalReport evaluate(Detector<float>& model, const Dataset& dataset, Split split,
                    std::size_t threads = 1,
                    ApInterpolation mode = ApInterpolation::kUniqueRecall);

EvalReport evaluate_with(const SegmentDetector& detector,
                         const ModelConfig& config, const Dataset& dataset,
                         Split split, std::size_t threads = 1,
                         ApInterpolation mode = ApInterpolation::kUniqueRecall);

void append_metrics_row(const std::filesystem::path& csv, const EpochMetrics& m);

}  // namespace ccrcnn
