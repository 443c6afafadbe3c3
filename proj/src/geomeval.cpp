#include "ccrcnn/geomeval.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "ccrcnn/errors.hpp"

namespace ccrcnn {

double iou_1d(double a_begin, double a_end, double b_begin, double b_end) {
  const double inter_lo = std::max(a_begin, b_begin);
  const double inter_hi = std::min(a_end, b_end);
  const double union_lo = std::min(a_begin, b_begin);
  const double union_hi = std::max(a_end, b_end);
  const double span = union_hi - union_lo;
  if (span <= 0.0) return 0.0;
  return std::max(inter_hi - inter_lo, 0.0) / span;
}

double iou_1d(const Interval& a, const Interval& b) {
  const std::int64_t inter =
      std::max<std::int64_t>(std::min(a.end, b.end) - std::max(a.begin, b.begin), 0);
  const std::int64_t span = std::max(a.end, b.end) - std::min(a.begin, b.begin);
  if (span <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(span);
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.interval.begin != b.interval.begin) return a.interval.begin < b.interval.begin;
  if (a.scale_index != b.scale_index) return a.scale_index < b.scale_index;
  return a.interval.end < b.interval.end;
}

void sort_by_rank(std::vector<Detection>& detections) {
  std::stable_sort(detections.begin(), detections.end(), ranks_before);
}

std::vector<Detection> nms(std::vector<Detection> candidates,
                           double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("nms: IoU threshold must lie in [0, 1]");
  }
  sort_by_rank(candidates);
  std::vector<Detection> kept;
  for (const Detection& c : candidates) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (iou_1d(c.interval, k.interval) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

std::vector<bool> match_detections(std::span<const Detection> detections,
                                   std::span<const Interval> ground_truth,
                                   double tau) {
  std::vector<bool> taken(ground_truth.size(), false);
  std::vector<bool> flags;
  flags.reserve(detections.size());
  for (const Detection& d : detections) {
    double best = -1.0;
    std::size_t best_index = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (taken[g]) continue;
      const double iou = iou_1d(d.interval, ground_truth[g]);
      if (iou >= tau && iou > best) {
        best = iou;
        best_index = g;
      }
    }
    if (best_index < ground_truth.size()) {
      taken[best_index] = true;
      flags.push_back(true);
    } else {
      flags.push_back(false);
    }
  }
  return flags;
}

std::vector<PrPoint> precision_recall(const std::vector<bool>& tp_flags,
                                      std::size_t num_ground_truth) {
  std::vector<PrPoint> curve;
  curve.reserve(tp_flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    if (tp_flags[i]) ++tp;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(num_ground_truth),
                     static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return curve;
}

double average_precision_from_flags(const std::vector<bool>& tp_flags,
                                    std::size_t num_ground_truth,
                                    ApInterpolation mode) {
  if (num_ground_truth == 0) {
    throw ConfigError("average_precision: no ground-truth events");
  }
  const std::vector<PrPoint> curve = precision_recall(tp_flags, num_ground_truth);
  // Suffix maximum of precision: the best precision at or beyond each row.
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }

  if (mode == ApInterpolation::kCoco101) {
    double sum = 0.0;
    std::size_t row = 0;
    for (int r = 0; r <= 100; ++r) {
      const double level = r / 100.0;
      while (row < curve.size() && curve[row].recall < level) ++row;
      if (row < curve.size()) sum += envelope[row];
    }
    return sum / 101.0;
  }

  // Distinct recall levels are reached exactly at true-positive rows; the
  // envelope there equals the max precision at recall >= that level.
  double sum = 0.0;
  std::size_t levels = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!tp_flags[i]) continue;
    sum += envelope[i];
    ++levels;
  }
  return levels == 0 ? 0.0 : sum / static_cast<double>(levels);
}

double average_precision(std::vector<Detection> detections,
                         std::span<const Interval> ground_truth, double tau,
                         ApInterpolation mode) {
  if (ground_truth.empty()) {
    throw ConfigError("average_precision: no ground-truth events");
  }
  sort_by_rank(detections);
  const std::vector<bool> flags = match_detections(detections, ground_truth, tau);
  return average_precision_from_flags(flags, ground_truth.size(), mode);
}

double iou_threshold(std::size_t index) {
  return (50.0 + 5.0 * static_cast<double>(index)) / 100.0;
}

EvalReport ap_range(std::vector<Detection> detections,
                    std::span<const Interval> ground_truth,
                    ApInterpolation mode) {
  if (ground_truth.empty()) {
    throw ConfigError("ap_range: no ground-truth events");
  }
  sort_by_rank(detections);
  EvalReport report;
  double total = 0.0;
  for (std::size_t k = 0; k < kNumIouThresholds; ++k) {
    const std::vector<bool> flags =
        match_detections(detections, ground_truth, iou_threshold(k));
    report.ap_per_threshold[k] =
        average_precision_from_flags(flags, ground_truth.size(), mode);
    report.pr_curves[k] = precision_recall(flags, ground_truth.size());
    const auto tp = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    report.tp[k] = tp;
    report.fp[k] = flags.size() - tp;
    report.missed[k] = ground_truth.size() - tp;
    total += report.ap_per_threshold[k];
  }
  report.map = total / static_cast<double>(kNumIouThresholds);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["ap_per_threshold"] = ap_per_threshold;
  j["map"] = map;
  j["tp"] = tp;
  j["fp"] = fp;
  j["missed"] = missed;
  std::vector<double> taus;
  for (std::size_t k = 0; k < kNumIouThresholds; ++k) taus.push_back(iou_threshold(k));
  j["iou_thresholds"] = taus;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  EvalReport r;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    r.ap_per_threshold = j.at("ap_per_threshold").get<std::array<double, kNumIouThresholds>>();
    r.map = j.at("map").get<double>();
    r.tp = j.at("tp").get<std::array<std::size_t, kNumIouThresholds>>();
    r.fp = j.at("fp").get<std::array<std::size_t, kNumIouThresholds>>();
    r.missed = j.at("missed").get<std::array<std::size_t, kNumIouThresholds>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("evaluation report: ") + e.what());
  }
  return r;
}

}  // namespace ccrcnn
