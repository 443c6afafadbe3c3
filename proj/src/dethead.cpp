#include "ccrcnn/dethead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccrcnn/errors.hpp"

namespace ccrcnn {
namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_label(int t) {
  if (t != 1 && t != -1) {
    throw ConfigError("classification label must be +1 or -1, got " +
                      std::to_string(t));
  }
}

}  // namespace

HeadConfig HeadConfig::full() { return HeadConfig{}; }

HeadConfig HeadConfig::desk() {
  HeadConfig c;
  c.anchor_sizes = {768, 1536, 3072};
  c.proposal_quotas = {64, 64, 64};
  return c;
}

void HeadConfig::validate(std::size_t num_scales) const {
  if (anchor_sizes.size() != num_scales) {
    throw ConfigError("head: " + std::to_string(anchor_sizes.size()) +
                      " anchor sizes for " + std::to_string(num_scales) +
                      " scales");
  }
  if (proposal_quotas.size() != num_scales) {
    throw ConfigError("head: " + std::to_string(proposal_quotas.size()) +
                      " proposal quotas for " + std::to_string(num_scales) +
                      " scales");
  }
  for (double a : anchor_sizes) {
    if (!(a > 0.0)) throw ConfigError("head: anchor sizes must be positive");
  }
  for (std::size_t d : dilations) {
    if (d == 0) throw ConfigError("head: dilation rates must be >= 1");
  }
  if (contextual && dilations.empty()) {
    throw ConfigError("head: contextual block needs at least one dilation");
  }
  if (first_scale >= scale_end(num_scales) || scale_end(num_scales) > num_scales) {
    throw ConfigError("head: scale range " + std::to_string(first_scale) +
                      ".." + std::to_string(last_scale) +
                      " is empty or outside [0, " +
                      std::to_string(num_scales - 1) + "]");
  }
  if (!(negative_iou >= 0.0 && negative_iou <= positive_iou &&
        positive_iou <= 1.0)) {
    throw ConfigError("head: need 0 <= negative_iou <= positive_iou <= 1");
  }
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0) ||
      !(score_threshold >= 0.0 && score_threshold < 1.0)) {
    throw ConfigError("head: NMS IoU and score threshold must be in [0,1]");
  }
  if (!(max_dw > 0.0) || !(logit_clamp > 0.0)) {
    throw ConfigError("head: max_dw and logit_clamp must be positive");
  }
}

void LossParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("loss: alpha must be in (0,1), got " +
                      std::to_string(alpha));
  }
  if (!(lambda >= 0.0)) throw ConfigError("loss: lambda must be >= 0");
  if (!(rho_plus >= 0.0 && rho_plus < 1.0 && rho_minus >= 0.0 &&
        rho_minus < 1.0)) {
    throw ConfigError("loss: noise rates must be in [0,1)");
  }
}

// ------------------------------------------------------------------ anchors

std::vector<Anchor> generate_anchors(std::size_t segment_length,
                                     std::size_t stride, double anchor_size,
                                     std::size_t scale_index) {
  if (stride == 0 || segment_length % stride != 0) {
    throw ConfigError("anchors: segment length " +
                      std::to_string(segment_length) +
                      " is not a multiple of stride " + std::to_string(stride));
  }
  const std::size_t n = segment_length / stride;
  std::vector<Anchor> anchors(n);
  for (std::size_t j = 0; j < n; ++j) {
    anchors[j] = Anchor{static_cast<double>(j * stride), anchor_size,
                        scale_index, j};
  }
  return anchors;
}

double anchor_iou(const Anchor& anchor, const Interval& gt) {
  return iou_1d(anchor.begin(), anchor.end(), static_cast<double>(gt.begin),
                static_cast<double>(gt.end));
}

// ----------------------------------------------------------- offset codec

Offsets encode_offsets(const Anchor& anchor, const RealInterval& gt) {
  if (!(gt.width() > 0.0)) {
    throw ConfigError("encode_offsets: ground truth width must be positive");
  }
  if (!(anchor.width > 0.0)) {
    throw ConfigError("encode_offsets: anchor width must be positive");
  }
  return Offsets{(gt.center() - anchor.center) / anchor.width,
                 std::log(gt.width() / anchor.width)};
}

Offsets encode_offsets(const Anchor& anchor, const Interval& gt) {
  return encode_offsets(anchor, RealInterval{static_cast<double>(gt.begin),
                                             static_cast<double>(gt.end)});
}

RealInterval decode_offsets(const Anchor& anchor, double dx, double dw,
                            const DecodeOptions& options, bool* capped) {
  const bool over = dw > options.max_dw;
  if (capped != nullptr) *capped = over;
  if (over) dw = options.max_dw;
  const double cx = anchor.width * dx + anchor.center;
  const double w = anchor.width * std::exp(dw);
  RealInterval r{cx - 0.5 * w, cx + 0.5 * w};
  if (options.clamp_end > options.clamp_begin) {
    r.begin = std::clamp(r.begin, options.clamp_begin, options.clamp_end);
    r.end = std::clamp(r.end, options.clamp_begin, options.clamp_end);
  }
  return r;
}

Interval to_interval(const RealInterval& r) {
  Interval out{static_cast<std::int64_t>(std::floor(r.begin + 0.5)),
               static_cast<std::int64_t>(std::floor(r.end + 0.5))};
  if (out.end <= out.begin && r.end > r.begin) out.end = out.begin + 1;
  return out;
}

// ------------------------------------------------------------------ labels

std::vector<ProposalLabel> assign_labels(std::span<const Anchor> anchors,
                                         std::span<const Interval> ground_truth,
                                         double positive_iou,
                                         double negative_iou,
                                         std::span<const Interval> ignore) {
  for (const auto& g : ground_truth) {
    if (!g.valid()) throw ConfigError("assign_labels: invalid ground truth");
  }
  std::vector<ProposalLabel> labels(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const Anchor& anchor = anchors[a];
    ProposalLabel& label = labels[a];
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const double iou = anchor_iou(anchor, ground_truth[g]);
      const bool better =
          !label.matched_gt || iou > label.best_iou ||
          (iou == label.best_iou &&
           ground_truth[g].begin < ground_truth[*label.matched_gt].begin);
      if (better) {
        label.best_iou = iou;
        label.matched_gt = g;
      }
    }
    if (label.matched_gt && label.best_iou > positive_iou) {
      label.cls = LabelClass::kPositive;
      label.targets = encode_offsets(anchor, ground_truth[*label.matched_gt]);
      continue;
    }
    label.matched_gt.reset();
    if (label.best_iou >= negative_iou) {
      label.cls = LabelClass::kNeutral;
      continue;
    }
    label.cls = LabelClass::kNegative;
    for (const auto& cut : ignore) {
      if (anchor.begin() < static_cast<double>(cut.end) &&
          static_cast<double>(cut.begin) < anchor.end()) {
        label.cls = LabelClass::kNeutral;
        break;
      }
    }
  }
  return labels;
}

// ------------------------------------------------------------------ losses

double derive_alpha(double rho_plus, double rho_minus) {
  if (!(rho_plus >= 0.0 && rho_plus < 1.0) ||
      !(rho_minus >= 0.0 && rho_minus < 1.0)) {
    throw ConfigError("derive_alpha: noise rates must be in [0,1)");
  }
  return (1.0 - rho_plus + rho_minus) / 2.0;
}

double classification_loss(double d, int t, double alpha, double clamp) {
  check_label(t);
  d = std::clamp(d, -clamp, clamp);
  return t == 1 ? alpha * softplus(-d) : (1.0 - alpha) * softplus(d);
}

double classification_loss_grad(double d, int t, double alpha, double clamp) {
  check_label(t);
  if (d > clamp || d < -clamp) return 0.0;
  return t == 1 ? -alpha * stable_sigmoid(-d) : (1.0 - alpha) * stable_sigmoid(d);
}

double logistic_loss(double d, int t) {
  check_label(t);
  return t == 1 ? softplus(-d) : softplus(d);
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

double regression_loss(double d, double t) { return smooth_l1(t - d); }

JointLoss joint_loss(std::span<const SampledProposal> proposals,
                     std::span<const ProposalPrediction> predictions,
                     const LossParams& params, double clamp) {
  if (proposals.empty()) throw ConfigError("joint_loss: empty proposal batch");
  if (proposals.size() != predictions.size()) {
    throw ConfigError("joint_loss: " + std::to_string(proposals.size()) +
                      " proposals but " + std::to_string(predictions.size()) +
                      " predictions");
  }
  const double n = static_cast<double>(proposals.size());
  JointLoss out;
  out.grads.resize(proposals.size());
  double cls_sum = 0.0;
  double reg_sum = 0.0;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const SampledProposal& p = proposals[i];
    const ProposalPrediction& y = predictions[i];
    cls_sum += classification_loss(y.d_cls, p.t_cls, params.alpha, clamp);
    ProposalPrediction& g = out.grads[i];
    g.d_cls = classification_loss_grad(y.d_cls, p.t_cls, params.alpha, clamp) / n;
    if (p.t_cls == 1) {
      reg_sum += regression_loss(y.d_x, p.targets.tx) +
                 regression_loss(y.d_w, p.targets.tw);
      g.d_x = -params.lambda * smooth_l1_grad(p.targets.tx - y.d_x) / n;
      g.d_w = -params.lambda * smooth_l1_grad(p.targets.tw - y.d_w) / n;
    }
  }
  out.classification = cls_sum / n;
  out.regression = reg_sum / n;
  out.value = out.classification + params.lambda * out.regression;
  return out;
}

std::vector<SampledProposal> sample_proposals(
    std::span<const std::vector<ProposalLabel>> labels_per_scale,
    std::span<const std::size_t> quotas, std::mt19937_64& rng) {
  if (quotas.size() < labels_per_scale.size()) {
    throw ConfigError("sample_proposals: " + std::to_string(quotas.size()) +
                      " quotas for " + std::to_string(labels_per_scale.size()) +
                      " scales");
  }
  std::vector<SampledProposal> out;
  std::vector<std::size_t> pos, neg, neutral;
  for (std::size_t s = 0; s < labels_per_scale.size(); ++s) {
    const auto& labels = labels_per_scale[s];
    pos.clear();
    neg.clear();
    neutral.clear();
    for (std::size_t j = 0; j < labels.size(); ++j) {
      switch (labels[j].cls) {
        case LabelClass::kPositive: pos.push_back(j); break;
        case LabelClass::kNegative: neg.push_back(j); break;
        case LabelClass::kNeutral: neutral.push_back(j); break;
      }
    }
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::shuffle(neutral.begin(), neutral.end(), rng);
    const std::size_t quota = quotas[s];
    const std::size_t n_pos = std::min(pos.size(), quota / 2);
    std::size_t n_neg = quota - n_pos;
    for (std::size_t i = 0; i < n_pos; ++i) {
      const ProposalLabel& l = labels[pos[i]];
      out.push_back({s, pos[i], 1, l.targets});
    }
    const std::size_t from_neg = std::min(n_neg, neg.size());
    for (std::size_t i = 0; i < from_neg; ++i) out.push_back({s, neg[i], -1, {}});
    n_neg -= from_neg;
    const std::size_t from_neutral = std::min(n_neg, neutral.size());
    for (std::size_t i = 0; i < from_neutral; ++i) {
      out.push_back({s, neutral[i], -1, {}});
    }
  }
  return out;
}

// ------------------------------------------------------------- inference

std::vector<Detection> detect(std::span<const ScalePrediction> scales,
                              std::size_t segment_length,
                              const HeadConfig& config) {
  std::vector<Detection> candidates;
  DecodeOptions opts;
  opts.max_dw = config.max_dw;
  opts.clamp_begin = 0.0;
  opts.clamp_end = static_cast<double>(segment_length);
  for (const ScalePrediction& s : scales) {
    if (s.offsets.size() != 2 * s.logits.size()) {
      throw ConfigError("detect: offsets must hold two values per node");
    }
    for (std::size_t j = 0; j < s.logits.size(); ++j) {
      const double score = stable_sigmoid(s.logits[j]);
      if (!(score > config.score_threshold)) continue;
      const Anchor anchor{static_cast<double>(j * s.stride), s.anchor_size,
                          s.scale_index, j};
      const Interval iv = to_interval(
          decode_offsets(anchor, s.offsets[2 * j], s.offsets[2 * j + 1], opts));
      if (!iv.valid()) continue;
      candidates.push_back({iv, score, static_cast<int>(s.scale_index)});
    }
  }
  return nms(std::move(candidates), config.nms_iou);
}

void shift_detections(std::vector<Detection>& dets, std::int64_t offset) {
  for (auto& d : dets) {
    d.interval.begin += offset;
    d.interval.end += offset;
  }
}

// ------------------------------------------------------------ NN modules

template <typename T>
ContextualBlock<T>::ContextualBlock(std::size_t channels,
                                    std::vector<std::size_t> dilations,
                                    double bn_momentum, double bn_epsilon)
    : channels_(channels) {
  branches_.reserve(dilations.size());
  norms_.reserve(dilations.size());
  for (std::size_t b = 0; b < dilations.size(); ++b) {
    const std::string name = "context.atrous" + std::to_string(dilations[b]);
    branches_.emplace_back(name + ".conv", 3, channels, channels, 1,
                           dilations[b],
                           nn::Conv1d<T>::same_padding(3, dilations[b]));
    norms_.emplace_back(name + ".bn", channels, static_cast<T>(bn_momentum),
                        static_cast<T>(bn_epsilon));
  }
  fuse_ = nn::Conv1d<T>("context.fuse", 1, channels * (dilations.size() + 1),
                        channels);
}

template <typename T>
void ContextualBlock<T>::init(std::mt19937_64& rng) {
  for (auto& b : branches_) b.init_fan_in(rng);
  // Nothing nonlinear follows the fuse convolution.
  fuse_.init_fan_in(rng, 1.0);
}

template <typename T>
typename ContextualBlock<T>::Id ContextualBlock<T>::forward(nn::Tape<T>& tape,
                                                            Id features) {
  const Id one[1] = {features};
  return forward_stacked(tape, one);
}

template <typename T>
typename ContextualBlock<T>::Id ContextualBlock<T>::forward_stacked(
    nn::Tape<T>& tape, std::span<const Id> scales) {
  if (scales.empty()) throw ConfigError("contextual block: no scales");
  for (Id id : scales) {
    if (tape.value(id).channels() != channels_) {
      throw ConfigError("contextual block: expected " +
                        std::to_string(channels_) + " channels, got " +
                        nn::shape_string(tape.value(id)));
    }
  }
  auto stack = [&tape](const std::vector<Id>& ids) {
    return ids.size() == 1 ? ids[0] : tape.concat_time(ids);
  };
  std::vector<Id> parts{stack({scales.begin(), scales.end()})};
  std::vector<Id> per_scale;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    per_scale.clear();
    for (Id id : scales) per_scale.push_back(tape.conv(id, branches_[b]));
    Id h = tape.batchnorm(stack(per_scale), norms_[b]);
    parts.push_back(tape.relu(h));
  }
  return tape.conv(tape.concat(parts), fuse_);
}

template <typename T>
void ContextualBlock<T>::set_identity() {
  for (auto& b : branches_) {
    std::fill(b.params().weights.begin(), b.params().weights.end(), T(0));
    std::fill(b.params().bias.begin(), b.params().bias.end(), T(0));
  }
  auto& f = fuse_.params();
  std::fill(f.weights.begin(), f.weights.end(), T(0));
  std::fill(f.bias.begin(), f.bias.end(), T(0));
  for (std::size_t c = 0; c < channels_; ++c) f.weight(0, c, c) = T(1);
}

template <typename T>
void ContextualBlock<T>::collect(nn::ParamCollector<T>& out) {
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    branches_[b].collect(out);
    norms_[b].collect(out);
  }
  fuse_.collect(out);
}

template <typename T>
std::size_t ContextualBlock<T>::parameter_count() const {
  std::size_t n = fuse_.parameter_count();
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    n += branches_[b].parameter_count() + norms_[b].parameter_count();
  }
  return n;
}

template <typename T>
SiblingHeads<T>::SiblingHeads(std::size_t channels)
    : cls_("head.cls", 1, channels, 1), reg_("head.reg", 1, channels, 2) {}

template <typename T>
void SiblingHeads<T>::init(std::mt19937_64& rng, double stddev) {
  cls_.init_normal(rng, stddev);
  reg_.init_normal(rng, stddev);
}

template <typename T>
std::pair<typename SiblingHeads<T>::Id, typename SiblingHeads<T>::Id>
SiblingHeads<T>::forward(nn::Tape<T>& tape, Id features) {
  return {tape.conv(features, cls_), tape.conv(features, reg_)};
}

template <typename T>
void SiblingHeads<T>::collect(nn::ParamCollector<T>& out) {
  cls_.collect(out);
  reg_.collect(out);
}

template <typename T>
std::size_t SiblingHeads<T>::parameter_count() const {
  return cls_.parameter_count() + reg_.parameter_count();
}

template class ContextualBlock<float>;
template class ContextualBlock<double>;
template class SiblingHeads<float>;
template class SiblingHeads<double>;

}  // namespace ccrcnn
