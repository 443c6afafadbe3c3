#pragma once

// Minimal static SVG charts for the --plot flag.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccrcnn/geomeval.hpp"

namespace ccrcnn::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string colour;
};

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series);

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values);

// Waveform excerpt starting at sample `origin`, with ground truth drawn
// below the trace and detections above it.
std::string detection_plot(const std::string& title, std::span<const float> samples,
                           std::int64_t origin, std::span<const Interval> truth,
                           std::span<const Detection> detections);

}  // namespace ccrcnn::svg
