#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ccrcnn::svg {
namespace {

constexpr double kWidth = 900, kHeight = 360, kLeft = 60, kRight = 20, kTop = 40,
                 kBottom = 40;

std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f", v);
  return b;
}

std::string header(const std::string& title, double height = kHeight) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) +
         "\" height=\"" + num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         title + "</text>\n";
}

struct Range {
  double lo = 0, hi = 1;
  void fit(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::vector<Series>& series) {
  Range xr{1e300, -1e300}, yr{0, -1e300};
  for (const auto& s : series) {
    for (double v : s.x) xr.fit(v);
    for (double v : s.y) {
      if (std::isfinite(v)) yr.fit(v);
    }
  }
  if (!(xr.hi > xr.lo)) xr = {xr.lo, xr.lo + 1};
  if (!(yr.hi > yr.lo)) yr.hi = yr.lo + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + pw * (x - xr.lo) / (xr.hi - xr.lo); };
  auto py = [&](double y) { return kTop + ph * (1 - (y - yr.lo) / (yr.hi - yr.lo)); };

  std::string out = header(title);
  out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#999\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = yr.lo + (yr.hi - yr.lo) * i / 4;
    out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(y) + 4) +
           "\" text-anchor=\"end\">" + num(y) + "</text>\n";
  }
  out += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 10) +
         "\" text-anchor=\"middle\">" + x_label + "</text>\n";
  double legend_y = kTop + 14;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.y[i])) pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + s.colour + "\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
    out += "<text x=\"" + num(kWidth - kRight - 8) + "\" y=\"" + num(legend_y) +
           "\" text-anchor=\"end\" fill=\"" + s.colour + "\">" + s.name + "</text>\n";
    legend_y += 16;
  }
  return out + "</svg>\n";
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
  double hi = 1e-12;
  for (double v : values) hi = std::max(hi, v);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom - 20;
  const double slot = pw / std::max<std::size_t>(1, values.size());
  std::string out = header(title);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = ph * values[i] / hi;
    const double x = kLeft + slot * i + slot * 0.15;
    out += "<rect x=\"" + num(x) + "\" y=\"" + num(kTop + ph - h) + "\" width=\"" +
           num(slot * 0.7) + "\" height=\"" + num(h) + "\" fill=\"#4c72b0\"/>\n";
    out += "<text x=\"" + num(x + slot * 0.35) + "\" y=\"" + num(kTop + ph - h - 4) +
           "\" text-anchor=\"middle\">" + num(values[i]) + "</text>\n";
    out += "<text x=\"" + num(x + slot * 0.35) + "\" y=\"" + num(kTop + ph + 16) +
           "\" text-anchor=\"middle\">" + (i < labels.size() ? labels[i] : "") + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string detection_plot(const std::string& title, std::span<const float> samples,
                           std::int64_t origin, std::span<const Interval> truth,
                           std::span<const Detection> detections) {
  const double pw = kWidth - kLeft - kRight;
  const double mid = kTop + 130, amp = 90;
  const auto n = static_cast<double>(std::max<std::size_t>(samples.size(), 1));
  auto px = [&](double t) { return kLeft + pw * (t - static_cast<double>(origin)) / n; };
  float peak = 1e-12f;
  for (float v : samples) peak = std::max(peak, std::abs(v));

  std::string out = header(title);
  // Min/max envelope per pixel column keeps the file small for long excerpts.
  const auto cols = static_cast<std::size_t>(pw);
  std::string pts;
  for (std::size_t c = 0; c < cols; ++c) {
    const auto a = static_cast<std::size_t>(n * c / cols);
    const auto b = std::max(a + 1, static_cast<std::size_t>(n * (c + 1) / cols));
    float lo = 0, hi = 0;
    for (std::size_t i = a; i < b && i < samples.size(); ++i) {
      lo = std::min(lo, samples[i]);
      hi = std::max(hi, samples[i]);
    }
    const double x = kLeft + static_cast<double>(c);
    pts += num(x) + "," + num(mid - amp * hi / peak) + " " + num(x) + "," +
           num(mid - amp * lo / peak) + " ";
  }
  out += "<polyline fill=\"none\" stroke=\"#333\" stroke-width=\"0.6\" points=\"" + pts + "\"/>\n";
  const double end = static_cast<double>(origin) + n;
  for (const auto& g : truth) {
    if (g.end <= origin || static_cast<double>(g.begin) >= end) continue;
    const double x0 = std::max(px(double(g.begin)), kLeft);
    const double x1 = std::min(px(double(g.end)), kLeft + pw);
    out += "<rect x=\"" + num(x0) + "\" y=\"" + num(mid + amp + 20) + "\" width=\"" +
           num(x1 - x0) + "\" height=\"10\" fill=\"#55a868\"/>\n";
  }
  for (const auto& d : detections) {
    if (d.interval.end <= origin || static_cast<double>(d.interval.begin) >= end) continue;
    const double x0 = std::max(px(double(d.interval.begin)), kLeft);
    const double x1 = std::min(px(double(d.interval.end)), kLeft + pw);
    out += "<rect x=\"" + num(x0) + "\" y=\"" + num(mid - amp - 30) + "\" width=\"" +
           num(x1 - x0) + "\" height=\"10\" fill=\"#c44e52\" fill-opacity=\"" +
           num(0.3 + 0.7 * d.score) + "\"/>\n";
  }
  out += "<text x=\"" + num(kLeft) + "\" y=\"" + num(kHeight - 10) +
         "\">red: detections (opacity = score), green: ground truth; samples " +
         std::to_string(origin) + " to " + std::to_string(origin + static_cast<std::int64_t>(n)) +
         "</text>\n";
  return out + "</svg>\n";
}

}  // namespace ccrcnn::svg
