#include "ccrcnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "ccrcnn/config.hpp"
#include "ccrcnn/errors.hpp"

namespace ccrcnn {

void TrainConfig::validate_config() const {
  if (!(initial_lr > 0.0)) throw ConfigError("train: initial_lr must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw ConfigError("train: lr_decay must be in (0,1]");
  }
  if (lr_decay_every == 0) throw ConfigError("train: lr_decay_every must be >= 1");
  if (!(clip_norm >= 0.0)) throw ConfigError("train: clip_norm must be >= 0");
  if (threads == 0) throw ConfigError("train: threads must be >= 1");
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  return config.initial_lr *
         std::pow(config.lr_decay,
                  static_cast<double>(epoch / config.lr_decay_every));
}

PreparedSegment prepare_segment(const ModelConfig& config,
                                std::span<const float> waveform,
                                std::span<const Interval> events,
                                std::int64_t offset) {
  const std::size_t L = config.segment_length;
  if (offset < 0 || static_cast<std::size_t>(offset) + L > waveform.size()) {
    throw ConfigError("prepare_segment: window [" + std::to_string(offset) +
                      ", " + std::to_string(offset + static_cast<std::int64_t>(L)) +
                      ") outside a waveform of " +
                      std::to_string(waveform.size()) + " samples");
  }
  PreparedSegment seg;
  seg.offset = offset;
  seg.samples = normalize_segment(waveform.subspan(static_cast<std::size_t>(offset), L));
  const WindowTruth truth = window_truth(events, offset, L);
  seg.num_events = truth.inside.size();
  seg.labels.resize(config.num_scales());
  for (std::size_t s = config.first_active_scale(); s < config.end_active_scale(); ++s) {
    const auto anchors =
        generate_anchors(L, config.backbone.scale_stride(s),
                         config.head.anchor_sizes[s], s);
    seg.labels[s] = assign_labels(anchors, truth.inside, config.head.positive_iou,
                                  config.head.negative_iou, truth.truncated);
  }
  return seg;
}

std::vector<PreparedSegment> prepare_split(const ModelConfig& config,
                                           const Dataset& dataset, Split split) {
  const SplitView view = split_view(dataset, split);
  std::vector<PreparedSegment> out;
  const auto width = static_cast<std::size_t>(view.region.width());
  if (width < config.segment_length) return out;
  for (std::size_t o : segment_offsets(width, config.segment_length, config.overlap)) {
    out.push_back(prepare_segment(config, dataset.waveform, view.events,
                                  view.region.begin + static_cast<std::int64_t>(o)));
  }
  return out;
}

// ------------------------------------------------------------------ Trainer

Trainer::Trainer(Detector<float>& model, TrainConfig config)
    : model_(model), config_(std::move(config)), params_(model.parameters()) {
  config_.validate_config();
  adam_.config.lr = config_.initial_lr;
}

JointLoss Trainer::forward_backward(const PreparedSegment& segment,
                                    std::mt19937_64& rng) {
  using Tape = nn::Tape<float>;
  const ModelConfig& mc = model_.config();
  nn::zero_grads(params_.trainable);

  Tape tape(nn::Mode::kTrain);
  nn::Tensor<float> x(segment.samples.size(), 1);
  std::copy(segment.samples.begin(), segment.samples.end(), x.raw());
  const Tape::Id input = tape.constant(std::move(x));
  const auto out = model_.forward(tape, input);

  std::vector<std::vector<ProposalLabel>> labels;
  std::vector<std::size_t> quotas;
  for (std::size_t s : out.scales) {
    labels.push_back(segment.labels.at(s));
    quotas.push_back(mc.head.proposal_quotas[s]);
  }
  std::vector<SampledProposal> sampled = sample_proposals(labels, quotas, rng);
  if (sampled.empty()) throw ConfigError("training segment produced no proposals");

  const nn::Tensor<float>& logits = tape.value(out.logits);
  const nn::Tensor<float>& offsets = tape.value(out.offsets);
  std::vector<ProposalPrediction> preds(sampled.size());
  std::vector<std::size_t> rows(sampled.size());
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    const std::size_t local = sampled[i].scale_index;
    rows[i] = out.row_offset[local] + sampled[i].node_index;
    preds[i] = {logits(rows[i], 0), offsets(rows[i], 0), offsets(rows[i], 1)};
    sampled[i].scale_index = out.scales[local];
  }
  JointLoss loss = joint_loss(sampled, preds, mc.loss, mc.head.logit_clamp);

  nn::Tensor<float> seed(1, 1, 1.0f);
  const Tape::Id logits_id = out.logits;
  const Tape::Id offsets_id = out.offsets;
  const Tape::Id loss_id = tape.custom(
      nn::Tensor<float>(1, 1, static_cast<float>(loss.value)),
      {logits_id, offsets_id},
      [&loss, &rows, logits_id, offsets_id](Tape& t, Tape::Id) {
        nn::Tensor<float>& gl = t.grad(logits_id);
        nn::Tensor<float>& go = t.grad(offsets_id);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          gl(rows[i], 0) += static_cast<float>(loss.grads[i].d_cls);
          go(rows[i], 0) += static_cast<float>(loss.grads[i].d_x);
          go(rows[i], 1) += static_cast<float>(loss.grads[i].d_w);
        }
      });
  tape.backward(loss_id, seed);
  return loss;
}

void Trainer::dump_failure(const PreparedSegment& segment, const std::string& what) {
  if (config_.out_dir.empty()) return;
  const auto dir = config_.out_dir / "failure_dump";
  std::filesystem::create_directories(dir);
  save_waveform(dir / "segment.wv1d", segment.samples);
  nlohmann::ordered_json j;
  j["reason"] = what;
  j["offset"] = segment.offset;
  j["num_events"] = segment.num_events;
  j["adam_step"] = adam_.step_count;
  std::ofstream(dir / "batch.json") << j.dump(2) << '\n';
}

JointLoss Trainer::step(const PreparedSegment& segment, double lr,
                        std::mt19937_64& rng) {
  JointLoss loss = forward_backward(segment, rng);
  const double norm = config_.clip_norm > 0.0
                          ? nn::clip_grad_norm(params_.trainable, config_.clip_norm)
                          : nn::grad_norm(params_.trainable);
  if (!std::isfinite(loss.value) || !std::isfinite(norm)) {
    const std::string what = "non-finite " +
                             std::string(std::isfinite(loss.value) ? "gradient" : "loss") +
                             " on the segment at offset " +
                             std::to_string(segment.offset);
    dump_failure(segment, what);
    throw NumericalError(what);
  }
  adam_.config.lr = lr;
  nn::adam_step(adam_, params_.trainable);
  return loss;
}

TrainResult Trainer::fit(const Dataset& dataset) {
  const ModelConfig& mc = model_.config();
  const std::vector<PreparedSegment> segments =
      prepare_split(mc, dataset, Split::kTrain);
  if (segments.empty() && config_.epochs > 0) {
    throw DataError("training split is shorter than one segment");
  }
  if (!config_.out_dir.empty()) {
    std::filesystem::create_directories(config_.out_dir);
    std::ofstream(config_.out_dir / "model_config.json")
        << config_to_json(mc).dump(2) << '\n';
    std::ofstream(config_.out_dir / "metrics.csv", std::ios::trunc)
        << "epoch,loss,val_map,lr\n";
  }
  auto all = params_.all();
  std::vector<std::vector<float>> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto& p : all) best.emplace_back(p.value.begin(), p.value.end());
    if (!config_.out_dir.empty()) save_checkpoint(config_.out_dir / "best.ccr", params_);
  };

  TrainResult result;
  std::mt19937_64 rng(config_.seed);
  std::vector<std::size_t> order(segments.size());
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    const double lr = learning_rate(config_, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const JointLoss loss = step(segments[order[i]], lr, rng);
      if (epoch == 0 && i == 0) result.first_step_loss = loss.value;
      sum += loss.value;
    }
    EpochMetrics m{epoch, sum / static_cast<double>(order.size()), 0.0, lr};
    if (config_.validate && !dataset.split(Split::kVal).empty()) {
      m.val_map = evaluate(model_, dataset, Split::kVal, config_.threads).map;
      if (m.val_map > result.best_val_map) {
        result.best_val_map = m.val_map;
        result.best_epoch = epoch;
        snapshot();
      }
    }
    result.history.push_back(m);
    if (!config_.out_dir.empty()) append_metrics_row(config_.out_dir / "metrics.csv", m);
    if (config_.verbose) {
      std::fprintf(stderr, "epoch %zu loss %.5f val_map %.4f lr %.2e\n", epoch,
                   m.loss, m.val_map, m.lr);
    }
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < all.size(); ++i) {
      std::copy(best[i].begin(), best[i].end(), all[i].value.begin());
    }
  } else if (!config_.out_dir.empty()) {
    // No validation (or zero epochs): the final parameters are the result.
    save_checkpoint(config_.out_dir / "best.ccr", params_);
  }
  return result;
}

// --------------------------------------------------------------- inference

std::vector<Detection> detect_region(std::span<const float> waveform,
                                     Interval region,
                                     std::size_t segment_length, double overlap,
                                     double nms_iou,
                                     const SegmentDetector& detector,
                                     std::size_t threads) {
  if (region.begin < 0 || region.end > static_cast<std::int64_t>(waveform.size()) ||
      !region.valid()) {
    throw ConfigError("detect_region: region outside the waveform");
  }
  const auto width = static_cast<std::size_t>(region.width());
  std::vector<std::int64_t> offsets;
  if (width <= segment_length) {
    offsets.push_back(region.begin);
  } else {
    for (std::size_t o : segment_offsets(width, segment_length, overlap)) {
      offsets.push_back(region.begin + static_cast<std::int64_t>(o));
    }
  }
  const auto L = static_cast<std::int64_t>(segment_length);
  std::vector<std::vector<Detection>> per_window(offsets.size());
  auto run = [&](std::size_t i) {
    const std::int64_t o = offsets[i];
    const std::int64_t end = std::min(o + L, region.end);
    std::vector<float> window = normalize_segment(
        waveform.subspan(static_cast<std::size_t>(o), static_cast<std::size_t>(end - o)));
    window.resize(segment_length, 0.0f);
    std::vector<Detection> dets = detector(window, o);
    shift_detections(dets, o);
    // Each window owns the samples up to the middle of its overlaps.
    const double lo = i == 0 ? static_cast<double>(region.begin)
                             : 0.5 * static_cast<double>(offsets[i - 1] + L + o);
    const double hi = i + 1 == offsets.size()
                          ? static_cast<double>(region.end)
                          : 0.5 * static_cast<double>(o + L + offsets[i + 1]);
    for (const Detection& d : dets) {
      const double c = d.interval.center();
      if (c >= lo && c < hi && d.interval.end <= region.end &&
          d.interval.begin >= region.begin) {
        per_window[i].push_back(d);
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, offsets.size()));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < offsets.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < offsets.size(); i += n_threads) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  std::vector<Detection> merged;
  for (auto& w : per_window) merged.insert(merged.end(), w.begin(), w.end());
  return nms(std::move(merged), nms_iou);
}

std::vector<Detection> detect_region(Detector<float>& model,
                                     std::span<const float> waveform,
                                     Interval region, std::size_t threads) {
  const ModelConfig& mc = model.config();
  SegmentDetector fn = [&model](std::span<const float> window, std::int64_t) {
    return model.detect_segment(window);
  };
  return detect_region(waveform, region, mc.segment_length, mc.overlap,
                       mc.head.nms_iou, fn, threads);
}

EvalReport evaluate_with(const SegmentDetector& detector,
                         const ModelConfig& config, const Dataset& dataset,
                         Split split, std::size_t threads,
                         ApInterpolation mode) {
  const SplitView view = split_view(dataset, split);
  if (view.events.empty()) {
    throw DataError(std::string("split '") + split_name(split) + "' has no events");
  }
  auto dets = detect_region(dataset.waveform, view.region, config.segment_length,
                            config.overlap, config.head.nms_iou, detector, threads);
  return ap_range(std::move(dets), view.events, mode);
}

EvalReport evaluate(Detector<float>& model, const Dataset& dataset, Split split,
                    std::size_t threads, ApInterpolation mode) {
  SegmentDetector fn = [&model](std::span<const float> window, std::int64_t) {
    return model.detect_segment(window);
  };
  return evaluate_with(fn, model.config(), dataset, split, threads, mode);
}

void append_metrics_row(const std::filesystem::path& csv, const EpochMetrics& m) {
  std::ofstream out(csv, std::ios::app);
  if (!out) throw DataError("cannot append to " + csv.string());
  char line[160];
  std::snprintf(line, sizeof line, "%zu,%.8g,%.6f,%.8g\n", m.epoch, m.loss,
                m.val_map, m.lr);
  out << line;
}

}  // namespace ccrcnn
