#pragma once

// 1D interval geometry and the AP evaluation protocol.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ccrcnn {

// Half-open span [begin, end) of sample indices.
struct Interval {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  std::int64_t width() const { return end - begin; }
  double center() const { return 0.5 * static_cast<double>(begin + end); }
  bool valid() const { return begin < end; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// scale_index is the pyramid level that produced the detection; template
// matching uses -1.
struct Detection {
  Interval interval;
  double score = 0.0;
  int scale_index = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

// Intersection over union of two real-valued spans: overlap / union span.
double iou_1d(double a_begin, double a_end, double b_begin, double b_end);
double iou_1d(const Interval& a, const Interval& b);

// Deterministic ranking: higher score first, then earlier begin, then
// smaller scale index, then earlier end.
bool ranks_before(const Detection& a, const Detection& b);
void sort_by_rank(std::vector<Detection>& detections);

// Greedy non-maximum suppression. Returns the survivors in rank order; a
// candidate is dropped when its IoU with any kept detection exceeds
// `iou_threshold`.
std::vector<Detection> nms(std::vector<Detection> candidates,
                           double iou_threshold);

// Flags each detection (taken in the given order, which should be rank
// order) as a true positive when it reaches IoU >= tau with a ground truth
// not matched yet; the best-IoU free ground truth is consumed.
std::vector<bool> match_detections(std::span<const Detection> detections,
                                   std::span<const Interval> ground_truth,
                                   double tau);

enum class ApInterpolation {
  // Mean over every distinct recall level reached, of the maximum precision
  // at or beyond that recall.
  kUniqueRecall,
  // COCO style: mean interpolated precision at recall 0, 0.01, ..., 1.
  kCoco101,
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// Precision/recall after each detection of a flagged, rank-ordered list.
std::vector<PrPoint> precision_recall(const std::vector<bool>& tp_flags,
                                      std::size_t num_ground_truth);

double average_precision_from_flags(
    const std::vector<bool>& tp_flags, std::size_t num_ground_truth,
    ApInterpolation mode = ApInterpolation::kUniqueRecall);

// Ranks the detections, matches them at `tau` and integrates the PR curve.
// Throws ConfigError when there is no ground truth.
double average_precision(std::vector<Detection> detections,
                         std::span<const Interval> ground_truth, double tau,
                         ApInterpolation mode = ApInterpolation::kUniqueRecall);

inline constexpr std::size_t kNumIouThresholds = 10;

// 0.50, 0.55, ..., 0.95.
double iou_threshold(std::size_t index);

struct EvalReport {
  std::array<double, kNumIouThresholds> ap_per_threshold{};
  double map = 0.0;  // mean of ap_per_threshold
  std::array<std::size_t, kNumIouThresholds> tp{};
  std::array<std::size_t, kNumIouThresholds> fp{};
  std::array<std::size_t, kNumIouThresholds> missed{};
  std::array<std::vector<PrPoint>, kNumIouThresholds> pr_curves;

  // Keys: ap_per_threshold, map, tp, fp, missed (per-threshold arrays),
  // iou_thresholds.
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

EvalReport ap_range(std::vector<Detection> detections,
                    std::span<const Interval> ground_truth,
                    ApInterpolation mode = ApInterpolation::kUniqueRecall);

}  // namespace ccrcnn
