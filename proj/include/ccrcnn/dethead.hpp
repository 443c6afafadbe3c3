#pragma once

// Anchors, label assignment, the offset codec, the contextual atrous block,
// the shared sibling heads, the losses and proposal sampling.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ccrcnn/geomeval.hpp"
#include "ccrcnn/nn/module.hpp"
#include "ccrcnn/nn/tape.hpp"

namespace ccrcnn {

struct HeadConfig {
  // Anchor width of every detection scale, in samples.
  std::vector<double> anchor_sizes{128, 256, 512, 1024, 2048, 4096, 8192};
  std::vector<std::size_t> dilations{4, 8, 12};
  bool contextual = true;
  double positive_iou = 0.5;
  double negative_iou = 0.3;
  double score_threshold = 0.5;
  double nms_iou = 0.05;
  double max_dw = 4.0;
  double logit_clamp = 20.0;
  // Proposals sampled per scale and training segment.
  std::vector<std::size_t> proposal_quotas{64, 64, 64, 64, 32, 32, 16};
  // Detection scales in use, as the inclusive range [first, last]. A
  // negative `last` means "through the final scale".
  std::size_t first_scale = 0;
  int last_scale = -1;

  static HeadConfig full();
  static HeadConfig desk();

  std::size_t scale_end(std::size_t num_scales) const {
    return last_scale < 0 ? num_scales : static_cast<std::size_t>(last_scale) + 1;
  }
  bool scale_active(std::size_t scale, std::size_t num_scales) const {
    return scale >= first_scale && scale < scale_end(num_scales);
  }
  void validate(std::size_t num_scales) const;
};

struct LossParams {
  double alpha = 0.5;
  double lambda = 1.0;
  double rho_plus = 0.0;
  double rho_minus = 0.0;

  double beta() const { return 1.0 - alpha; }
  void validate() const;
};

// ------------------------------------------------------------------ anchors

struct Anchor {
  double center = 0.0;  // P_x
  double width = 0.0;   // P_w
  std::size_t scale_index = 0;
  std::size_t node_index = 0;

  // Real-valued support [center - width/2, center + width/2).
  double begin() const { return center - 0.5 * width; }
  double end() const { return center + 0.5 * width; }
};

// One anchor per feature node; node j is centred on j * stride.
std::vector<Anchor> generate_anchors(std::size_t segment_length,
                                     std::size_t stride, double anchor_size,
                                     std::size_t scale_index);

// IoU between an (untruncated) anchor and an integer interval.
double anchor_iou(const Anchor& anchor, const Interval& gt);

// ----------------------------------------------------------- offset codec

struct Offsets {
  double tx = 0.0;
  double tw = 0.0;
};

// Half-open real interval, before rounding to sample indices.
struct RealInterval {
  double begin = 0.0;
  double end = 0.0;
  double center() const { return 0.5 * (begin + end); }
  double width() const { return end - begin; }
};

// t_x = (G_x - P_x) / P_w, t_w = ln(G_w / P_w). Throws ConfigError when the
// target is empty.
Offsets encode_offsets(const Anchor& anchor, const RealInterval& gt);
Offsets encode_offsets(const Anchor& anchor, const Interval& gt);

struct DecodeOptions {
  double max_dw = 4.0;
  // Clamp window; ignored when clamp_end <= clamp_begin.
  double clamp_begin = 0.0;
  double clamp_end = 0.0;
};

// G*_x = P_w d_x + P_x, G*_w = P_w exp(min(d_w, max_dw)). `capped` is set
// when d_w had to be clipped.
RealInterval decode_offsets(const Anchor& anchor, double dx, double dw,
                            const DecodeOptions& options = {},
                            bool* capped = nullptr);

// Rounds a decoded interval to sample indices; never returns an empty one
// unless the input was empty after clamping.
Interval to_interval(const RealInterval& r);

// ------------------------------------------------------------------ labels

enum class LabelClass : std::uint8_t { kNegative = 0, kPositive = 1, kNeutral = 2 };

struct ProposalLabel {
  LabelClass cls = LabelClass::kNegative;
  std::optional<std::size_t> matched_gt;
  double best_iou = 0.0;
  Offsets targets;  // meaningful only for positives
};

// Positive when the best IoU exceeds `positive_iou` (ties go to the earlier
// ground truth), negative below `negative_iou`, neutral otherwise. Anchors
// overlapping any interval in `ignore` (events cut by the segment border)
// that would otherwise be negative become neutral.
std::vector<ProposalLabel> assign_labels(std::span<const Anchor> anchors,
                                         std::span<const Interval> ground_truth,
                                         double positive_iou = 0.5,
                                         double negative_iou = 0.3,
                                         std::span<const Interval> ignore = {});

// ------------------------------------------------------------------ losses

double derive_alpha(double rho_plus, double rho_minus);

// alpha 1{t=+1} ln(1 + e^-d) + (1 - alpha) 1{t=-1} ln(1 + e^d), with d
// clamped to [-clamp, clamp].
double classification_loss(double d, int t, double alpha, double clamp = 20.0);
// Derivative of classification_loss with respect to d.
double classification_loss_grad(double d, int t, double alpha,
                                double clamp = 20.0);

// Standard logistic loss ln(1 + e^{-t d}) in the same stable form.
double logistic_loss(double d, int t);

double smooth_l1(double x);
double smooth_l1_grad(double x);
// smooth_L1(t - d).
double regression_loss(double d, double t);

struct SampledProposal {
  std::size_t scale_index = 0;
  std::size_t node_index = 0;
  int t_cls = -1;  // +1 or -1
  Offsets targets;
};

struct ProposalPrediction {
  double d_cls = 0.0;
  double d_x = 0.0;
  double d_w = 0.0;
};

struct JointLoss {
  double value = 0.0;
  double classification = 0.0;  // mean classification term
  double regression = 0.0;      // mean regression term, before lambda
  // d value / d prediction, per proposal.
  std::vector<ProposalPrediction> grads;
};

// Mean over proposals of L_cls + lambda 1{t=+1} (L_reg(d_x) + L_reg(d_w)).
// Throws ConfigError for an empty batch or mismatched sizes.
JointLoss joint_loss(std::span<const SampledProposal> proposals,
                     std::span<const ProposalPrediction> predictions,
                     const LossParams& params, double clamp = 20.0);

// Per-scale 1:1 sampling. Positives are capped at half the quota (or at
// availability); negatives fill the rest, topped up by neutrals treated as
// negatives when short.
std::vector<SampledProposal> sample_proposals(
    std::span<const std::vector<ProposalLabel>> labels_per_scale,
    std::span<const std::size_t> quotas, std::mt19937_64& rng);

// ------------------------------------------------------------- inference

struct ScalePrediction {
  std::size_t scale_index = 0;
  std::size_t stride = 0;
  double anchor_size = 0.0;
  std::vector<double> logits;   // one per node
  std::vector<double> offsets;  // (d_x, d_w) per node
};

// Decodes every node whose sigmoid score exceeds the threshold, pools the
// candidates over scales and applies greedy NMS.
std::vector<Detection> detect(std::span<const ScalePrediction> scales,
                              std::size_t segment_length,
                              const HeadConfig& config);

// Shifts detections by `offset` into waveform coordinates.
void shift_detections(std::vector<Detection>& dets, std::int64_t offset);

// ------------------------------------------------------------ NN modules

// Three parallel atrous conv3 branches (BN + ReLU each), concatenated with
// the input and fused back to the input width by a 1x1 convolution.
template <typename T>
class ContextualBlock {
 public:
  using Id = typename nn::Tape<T>::Id;

  ContextualBlock(std::size_t channels, std::vector<std::size_t> dilations,
                  double bn_momentum = 0.9, double bn_epsilon = 1e-5);
  ContextualBlock(const ContextualBlock&) = delete;
  ContextualBlock& operator=(const ContextualBlock&) = delete;

  void init(std::mt19937_64& rng);
  Id forward(nn::Tape<T>& tape, Id features);
  // Applies the block to every scale with one set of weights. Atrous
  // convolutions run per scale; batch statistics are pooled over all scales.
  // Returns the scale outputs stacked along the timestep axis, in order.
  Id forward_stacked(nn::Tape<T>& tape, std::span<const Id> scales);

  std::size_t channels() const { return channels_; }
  std::vector<nn::Conv1d<T>>& branches() { return branches_; }
  std::vector<nn::BatchNorm1d<T>>& branch_norms() { return norms_; }
  nn::Conv1d<T>& fuse() { return fuse_; }

  // Zero atrous weights and a fuse conv that copies the input slice.
  void set_identity();

  void collect(nn::ParamCollector<T>& out);
  std::size_t parameter_count() const;

 private:
  std::size_t channels_;
  std::vector<nn::Conv1d<T>> branches_;
  std::vector<nn::BatchNorm1d<T>> norms_;
  nn::Conv1d<T> fuse_;
};

// 1x1 classifier (one logit) and regressor (d_x, d_w), shared by all scales.
template <typename T>
class SiblingHeads {
 public:
  using Id = typename nn::Tape<T>::Id;

  explicit SiblingHeads(std::size_t channels);
  SiblingHeads(const SiblingHeads&) = delete;
  SiblingHeads& operator=(const SiblingHeads&) = delete;

  void init(std::mt19937_64& rng, double stddev = 0.01);
  // Returns (logits L x 1, offsets L x 2).
  std::pair<Id, Id> forward(nn::Tape<T>& tape, Id features);

  nn::Conv1d<T>& classifier() { return cls_; }
  nn::Conv1d<T>& regressor() { return reg_; }

  void collect(nn::ParamCollector<T>& out);
  std::size_t parameter_count() const;

 private:
  nn::Conv1d<T> cls_;
  nn::Conv1d<T> reg_;
};

}  // namespace ccrcnn
