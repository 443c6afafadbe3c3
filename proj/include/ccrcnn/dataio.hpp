#pragma once

// Synthetic event generator, segmentation, normalisation and the on-disk
// formats for waveforms, annotations and dataset manifests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ccrcnn/geomeval.hpp"

namespace ccrcnn {

struct SynthConfig {
  std::size_t total_length = 3'400'000;
  std::size_t event_count = 1000;
  // Log-normal event lengths: median and shape, clipped to [min, max].
  double length_median = 1500.0;
  double length_sigma = 0.55;
  std::size_t length_min = 200;
  std::size_t length_max = 8192;
  double noise_sigma = 0.05;
  std::size_t min_gap = 200;
  double amplitude_min = 0.5;
  double amplitude_max = 2.0;
  // Carrier frequency range, cycles per sample.
  double frequency_min = 0.01;
  double frequency_max = 0.08;
  // Fraction of the event spent rising to the peak.
  double rise_fraction = 0.1;
  // Envelope level (relative to peak) that bounds the annotation.
  double support_level = 0.05;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);
Split parse_split(const std::string& name);

struct Dataset {
  std::vector<float> waveform;
  std::vector<Interval> events;  // sorted, disjoint
  // Event indices of each split, indexed by Split.
  std::vector<std::size_t> splits[3];
  SynthConfig generator;

  const std::vector<std::size_t>& split(Split s) const {
    return splits[static_cast<int>(s)];
  }
};

// Envelope value at offset t of an event of the given length: linear rise
// from `level` to 1 over the first rise_fraction, then exponential decay
// reaching `level` at the last sample; zero outside [0, length).
double event_envelope(std::size_t t, std::size_t length, double rise_fraction,
                      double level);

// Throws ConfigError when the events and minimum gaps cannot fit.
Dataset generate_synthetic(const SynthConfig& config);

// Sample range owned by a split. Boundaries sit at the midpoints of the gaps
// between the last event of one split and the first of the next.
struct SplitView {
  Interval region;
  std::vector<Interval> events;  // in waveform coordinates
};
SplitView split_view(const Dataset& dataset, Split split);

// Segment start offsets: 0, step, 2 step, ... with step =
// round((1 - overlap) * segment_length); a final segment is right-aligned to
// the end when the stride does not land there.
std::vector<std::size_t> segment_offsets(std::size_t total_length,
                                         std::size_t segment_length,
                                         double overlap);

struct Segment {
  std::size_t offset = 0;
  std::vector<float> samples;
};
std::vector<Segment> segment_waveform(std::span<const float> waveform,
                                      std::size_t segment_length,
                                      double overlap);

// Zero mean, unit population variance; variance floored at 1e-12 so
// constant input maps to zeros.
std::vector<float> normalize_segment(std::span<const float> segment);

// Ground truth of one window [begin, begin + length): events fully inside,
// shifted to window coordinates, and events cut by the window border.
struct WindowTruth {
  std::vector<Interval> inside;
  std::vector<Interval> truncated;
};
WindowTruth window_truth(std::span<const Interval> events, std::int64_t begin,
                         std::size_t length);

// --------------------------------------------------------------- file I/O

void save_waveform(const std::filesystem::path& path, std::span<const float> w);
std::vector<float> load_waveform(const std::filesystem::path& path);

void save_events(const std::filesystem::path& path,
                 std::span<const Interval> events);
// Rejects begin >= end, unsorted or overlapping rows.
std::vector<Interval> load_events(const std::filesystem::path& path);

// Detections CSV: header begin,end,score,scale; score with six decimals.
void save_detections(const std::filesystem::path& path,
                     std::span<const Detection> detections);
std::vector<Detection> load_detections(const std::filesystem::path& path);

// Writes waveform.wv1d, events.csv and manifest.json into `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
// Reads a manifest and the files it names (relative to the manifest).
Dataset load_dataset(const std::filesystem::path& manifest);

}  // namespace ccrcnn
