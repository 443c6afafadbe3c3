#include "ccrcnn/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "ccrcnn/errors.hpp"

namespace ccrcnn {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void shift(std::vector<Detection>& dets, std::int64_t by) {
  for (auto& d : dets) {
    d.interval.begin += by;
    d.interval.end += by;
  }
}

}  // namespace

Dataset obtain_dataset(const RunConfig& config, const std::filesystem::path& manifest) {
  if (!manifest.empty()) return load_dataset(manifest);
  return generate_synthetic(config.synth);
}

TrainOutcome train_and_test(const RunConfig& config, const Dataset& dataset,
                            const std::filesystem::path& out_dir) {
  Detector<float> model(config.model);
  model.init(config.train.seed);
  TrainConfig tc = config.train;
  tc.out_dir = out_dir;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir / "config.json") << config_to_json(config).dump(2) << '\n';
  }
  TrainOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  Trainer trainer(model, tc);
  out.train = trainer.fit(dataset);
  out.train_seconds = seconds_since(t0);
  const SplitView test = split_view(dataset, Split::kTest);
  if (test.events.empty()) throw DataError("split 'test' has no events");
  const auto dets = detect_region(model, dataset.waveform, test.region, tc.threads);
  out.test = ap_range(dets, test.events);
  out.test_coco = ap_range(dets, test.events, ApInterpolation::kCoco101);
  out.test_events = test.events.size();
  if (!out_dir.empty()) {
    std::ofstream(out_dir / "test_report.json") << out.test.to_json() << '\n';
    std::ofstream(out_dir / "test_report_coco.json") << out.test_coco.to_json() << '\n';
  }
  return out;
}

TmOutcome run_tm_baseline(const Dataset& dataset, Split split,
                          const TemplateMatchConfig& config, std::size_t threads) {
  const SplitView train = split_view(dataset, Split::kTrain);
  const SplitView target = split_view(dataset, split);
  if (target.events.empty()) {
    throw DataError(std::string("split '") + split_name(split) + "' has no events");
  }
  const std::vector<Template> templates = templates_from_events(dataset.waveform, train.events);
  TmOptions opt;
  opt.mu = config.mu;
  opt.zero_mean = config.zero_mean;
  opt.nms_iou = config.nms_iou;
  opt.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  const std::span<const float> region(
      dataset.waveform.data() + target.region.begin,
      static_cast<std::size_t>(target.region.width()));
  TmResult r = detect_tm(templates, region, opt);
  TmOutcome out;
  out.seconds = seconds_since(t0);
  out.templates = templates.size();
  out.warnings = std::move(r.warnings);
  out.detections = std::move(r.detections);
  shift(out.detections, target.region.begin);
  out.report = ap_range(out.detections, target.events);
  return out;
}

ExactCopyOutcome tm_exact_copy_check(const Dataset& dataset,
                                     const TemplateMatchConfig& config,
                                     std::size_t copies, std::uint64_t seed,
                                     std::size_t threads) {
  const SplitView train = split_view(dataset, Split::kTrain);
  if (train.events.empty() || copies == 0) {
    throw ConfigError("exact-copy check needs training events and copies > 0");
  }
  const std::vector<Template> templates = templates_from_events(dataset.waveform, train.events);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, templates.size() - 1);
  std::uniform_int_distribution<std::size_t> gap(dataset.generator.min_gap + 1000,
                                                 dataset.generator.min_gap + 6000);
  std::vector<std::size_t> chosen(copies);
  std::vector<std::size_t> gaps(copies + 1);
  std::size_t total = 0;
  for (std::size_t i = 0; i < copies; ++i) {
    chosen[i] = pick(rng);
    gaps[i] = gap(rng);
    total += gaps[i] + templates[chosen[i]].samples.size();
  }
  gaps[copies] = gap(rng);
  total += gaps[copies];

  std::normal_distribution<double> noise(0.0, dataset.generator.noise_sigma);
  std::vector<float> wave(total);
  for (float& v : wave) v = static_cast<float>(noise(rng));
  std::vector<Interval> truth;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < copies; ++i) {
    cursor += gaps[i];
    const auto& s = templates[chosen[i]].samples;
    // An exact copy replaces the background rather than adding to it.
    std::copy(s.begin(), s.end(), wave.begin() + static_cast<std::ptrdiff_t>(cursor));
    truth.push_back({static_cast<std::int64_t>(cursor),
                     static_cast<std::int64_t>(cursor + s.size())});
    cursor += s.size();
  }

  TmOptions opt;
  opt.mu = config.mu;
  opt.zero_mean = config.zero_mean;
  opt.nms_iou = config.nms_iou;
  opt.threads = threads;
  const TmResult r = detect_tm(templates, wave, opt);
  const EvalReport rep = ap_range(r.detections, truth);
  ExactCopyOutcome out;
  out.embedded = copies;
  out.found = rep.tp[0];
  out.recall = static_cast<double>(out.found) / static_cast<double>(copies);
  out.ap50 = rep.ap_per_threshold[0];
  return out;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"contextual-multiscale", true, true},
          {"noncontextual-multiscale", false, true},
          {"contextual-singlescale", true, false},
          {"noncontextual-singlescale", false, false}};
}

ModelConfig apply_variant(ModelConfig model, const AblationVariant& variant) {
  model.head.contextual = variant.contextual;
  if (!variant.multiscale) {
    const std::size_t mid = model.num_scales() / 2;
    model.head.first_scale = mid;
    model.head.last_scale = static_cast<int>(mid);
  }
  model.validate();
  return model;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, const Dataset& dataset,
                                      const std::vector<AblationVariant>& variants,
                                      const ProgressFn& progress) {
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow row;
    row.variant = v;
    for (std::size_t s = 0; s < config.ablation.seeds; ++s) {
      RunConfig c = config;
      c.model = apply_variant(config.model, v);
      c.train.seed = s;
      if (config.ablation.epochs > 0) c.train.epochs = config.ablation.epochs;
      const TrainOutcome o = train_and_test(c, dataset);
      row.map.push_back(o.test.map);
      row.ap50.push_back(o.test.ap_per_threshold[0]);
      row.coco_map.push_back(o.test_coco.map);
      if (progress) {
        char msg[200];
        std::snprintf(msg, sizeof msg,
                      "%s seed %zu: test mAP %.4f AP@.50 %.4f COCO mAP %.4f (%.0f s)",
                      v.name.c_str(), s, o.test.map, o.test.ap_per_threshold[0],
                      o.test_coco.map, o.train_seconds);
        progress(msg);
      }
    }
    auto mean = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    };
    row.mean_map = mean(row.map);
    row.mean_ap50 = mean(row.ap50);
    row.mean_coco_map = mean(row.coco_map);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out =
      "| variant | contextual | scales | mAP per seed | mean mAP | mean AP@.50 | mean COCO mAP |\n"
      "|---|---|---|---|---|---|---|\n";
  char buf[64];
  for (const auto& r : rows) {
    std::string seeds;
    for (std::size_t i = 0; i < r.map.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.4f", i ? " / " : "", r.map[i]);
      seeds += buf;
    }
    out += "| " + r.variant.name + " | " + (r.variant.contextual ? "yes" : "no") + " | " +
           (r.variant.multiscale ? "all" : "middle") + " | " + seeds + " | ";
    std::snprintf(buf, sizeof buf, "%.4f | %.4f | %.4f |\n", r.mean_map, r.mean_ap50,
                  r.mean_coco_map);
    out += buf;
  }
  return out;
}

}  // namespace ccrcnn
