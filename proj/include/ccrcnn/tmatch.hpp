#pragma once

// Template-matching baseline: sliding normalised cross-correlation, a
// MAD-scaled threshold and suppression of overlapping matches.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccrcnn/errors.hpp"
#include "ccrcnn/geomeval.hpp"

namespace ccrcnn {

struct Template {
  std::vector<float> samples;
  Interval source_interval;
};

// Cuts one template per event out of the waveform.
std::vector<Template> templates_from_events(std::span<const float> waveform,
                                            std::span<const Interval> events);

// <a, b> / (|a| |b|). Throws ConfigError on length mismatch or zero norm.
double normalized_cc(std::span<const double> a, std::span<const double> b);
double normalized_cc(std::span<const float> a, std::span<const float> b);

// Median; even sizes average the two central order statistics. Throws
// ConfigError on empty input.
double median(std::vector<double> values);
double mad(std::span<const double> values);

// CC of the template against every window of the waveform (length
// n - m + 1). Windows with zero norm score 0. `zero_mean` subtracts the
// window and template means first. Plain window norms come from running sums;
// centred ones are accumulated per window.
std::vector<double> cc_trace(std::span<const float> waveform,
                             std::span<const float> tmpl, bool zero_mean = false);
// Direct per-window evaluation; the reference for cc_trace.
std::vector<double> cc_trace_naive(std::span<const float> waveform,
                                   std::span<const float> tmpl,
                                   bool zero_mean = false);

struct TmOptions {
  double mu = 8.0;
  bool zero_mean = false;
  double nms_iou = 0.05;
  std::size_t threads = 1;
};

struct TmResult {
  std::vector<Detection> detections;  // scale_index -1
  std::vector<std::string> warnings;
};

// Per template: candidates are the offsets whose CC exceeds mu * MAD(trace),
// thinned to the best match per overlap cluster; all templates' survivors
// are then merged by greedy NMS keeping the highest CC. Templates longer than
// the waveform are skipped with a warning.
TmResult detect_tm(std::span<const Template> templates,
                   std::span<const float> waveform, const TmOptions& options);

}  // namespace ccrcnn
