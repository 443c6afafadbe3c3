#include "ccrcnn/tmatch.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include "ccrcnn/errors.hpp"

namespace ccrcnn {

std::vector<Template> templates_from_events(std::span<const float> waveform,
                                            std::span<const Interval> events) {
  std::vector<Template> out;
  for (const Interval& e : events) {
    if (e.begin < 0 || e.end > static_cast<std::int64_t>(waveform.size()) || !e.valid()) {
      throw DataError("template interval outside the waveform");
    }
    out.push_back({std::vector<float>(waveform.begin() + e.begin,
                                      waveform.begin() + e.end),
                   e});
  }
  return out;
}

namespace {

template <typename T>
double cc_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw ConfigError("normalized_cc: lengths " + std::to_string(a.size()) +
                      " and " + std::to_string(b.size()) + " differ");
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ConfigError("normalized_cc: zero-norm input");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

// Template (optionally centred) and its norm.
std::pair<std::vector<double>, double> prepare_template(std::span<const float> tmpl,
                                                        bool zero_mean) {
  std::vector<double> t(tmpl.begin(), tmpl.end());
  if (zero_mean) {
    double mean = 0.0;
    for (double v : t) mean += v;
    mean /= static_cast<double>(t.size());
    for (double& v : t) v -= mean;
  }
  double nn = 0.0;
  for (double v : t) nn += v * v;
  return {std::move(t), std::sqrt(nn)};
}

void check_sizes(std::size_t n, std::size_t m) {
  if (m < 2) throw ConfigError("cc_trace: template needs at least 2 samples");
  if (m > n) throw ConfigError("cc_trace: template longer than the waveform");
}

double finish_cc(double dot, double window_sq, double tnorm) {
  if (!(window_sq > 0.0)) return 0.0;
  return std::clamp(dot / (std::sqrt(window_sq) * tnorm), -1.0, 1.0);
}

}  // namespace

double normalized_cc(std::span<const double> a, std::span<const double> b) {
  return cc_impl(a, b);
}

double normalized_cc(std::span<const float> a, std::span<const float> b) {
  return cc_impl(a, b);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty set");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

double mad(std::span<const double> values) {
  if (values.empty()) throw ConfigError("MAD of an empty set");
  const double m = median(std::vector<double>(values.begin(), values.end()));
  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - m);
  return median(std::move(dev));
}

std::vector<double> cc_trace(std::span<const float> waveform,
                             std::span<const float> tmpl, bool zero_mean) {
  const std::size_t n = waveform.size();
  const std::size_t m = tmpl.size();
  check_sizes(n, m);
  const auto [t, tnorm] = prepare_template(tmpl, zero_mean);
  const std::size_t count = n - m + 1;
  std::vector<double> trace(count, 0.0);
  if (tnorm == 0.0) return trace;

  std::vector<double> x(waveform.begin(), waveform.end());
  // Running sums give the window norms. Centred norms cannot use them: the
  // difference of two long prefix sums cancels badly for short templates next
  // to a level shift, so zero-mean windows are summed directly below.
  std::vector<double> s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) s2[i + 1] = s2[i] + x[i] * x[i];
  // Dot products in offset blocks: acc[o] += t[k] x[o + k] keeps the
  // per-offset summation order of a plain dot product.
  constexpr std::size_t kBlock = 1024;
  std::vector<double> acc(kBlock), wsum(kBlock), wsq(kBlock);
  for (std::size_t o0 = 0; o0 < count; o0 += kBlock) {
    const std::size_t b = std::min(kBlock, count - o0);
    std::fill(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(b), 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double tk = t[k];
      const double* xs = x.data() + o0 + k;
      double* a = acc.data();
      for (std::size_t j = 0; j < b; ++j) a[j] += tk * xs[j];
    }
    if (zero_mean) {
      // Two passes, as in the direct formula: window means, then squared
      // deviations from them.
      std::fill(wsum.begin(), wsum.begin() + static_cast<std::ptrdiff_t>(b), 0.0);
      std::fill(wsq.begin(), wsq.begin() + static_cast<std::ptrdiff_t>(b), 0.0);
      for (std::size_t k = 0; k < m; ++k) {
        const double* xs = x.data() + o0 + k;
        for (std::size_t j = 0; j < b; ++j) wsum[j] += xs[j];
      }
      for (std::size_t j = 0; j < b; ++j) wsum[j] /= static_cast<double>(m);
      for (std::size_t k = 0; k < m; ++k) {
        const double* xs = x.data() + o0 + k;
        for (std::size_t j = 0; j < b; ++j) {
          const double d = xs[j] - wsum[j];
          wsq[j] += d * d;
        }
      }
    }
    for (std::size_t j = 0; j < b; ++j) {
      const std::size_t o = o0 + j;
      double sq = wsq[j];
      if (!zero_mean) {
        sq = s2[o + m] - s2[o];
        // Guard against cancellation leaving a tiny negative or spurious value.
        if (sq <= 1e-14 * (s2[o + m] + s2[o])) sq = 0.0;
      }
      trace[o] = finish_cc(acc[j], sq, tnorm);
    }
  }
  return trace;
}

std::vector<double> cc_trace_naive(std::span<const float> waveform,
                                   std::span<const float> tmpl, bool zero_mean) {
  const std::size_t n = waveform.size();
  const std::size_t m = tmpl.size();
  check_sizes(n, m);
  const auto [t, tnorm] = prepare_template(tmpl, zero_mean);
  std::vector<double> trace(n - m + 1, 0.0);
  if (tnorm == 0.0) return trace;
  std::vector<double> w(m);
  for (std::size_t o = 0; o + m <= n; ++o) {
    double mean = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      w[k] = waveform[o + k];
      mean += w[k];
    }
    mean /= static_cast<double>(m);
    double dot = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double v = zero_mean ? w[k] - mean : w[k];
      dot += t[k] * v;
      sq += v * v;
    }
    trace[o] = finish_cc(dot, sq, tnorm);
  }
  return trace;
}

namespace {

// Greedy per-template suppression. All candidates share length m, so two
// offsets overlap beyond `iou` exactly when they are closer than `reach`.
std::vector<Detection> thin_template(const std::vector<double>& trace,
                                     double tau, std::size_t m, double iou,
                                     std::int64_t origin) {
  std::vector<std::size_t> idx;
  for (std::size_t o = 0; o < trace.size(); ++o) {
    if (trace[o] > tau) idx.push_back(o);
  }
  std::stable_sort(idx.begin(), idx.end(), [&trace](std::size_t a, std::size_t b) {
    return trace[a] > trace[b];
  });
  // IoU of two length-m windows d apart is (m - d) / (m + d).
  const double md = static_cast<double>(m);
  const double reach = md * (1.0 - iou) / (1.0 + iou);
  std::set<std::size_t> kept;
  std::vector<Detection> out;
  for (std::size_t o : idx) {
    auto it = kept.lower_bound(o);
    bool hit = false;
    if (it != kept.end() && static_cast<double>(*it - o) < reach) hit = true;
    if (!hit && it != kept.begin() && static_cast<double>(o - *std::prev(it)) < reach) {
      hit = true;
    }
    if (hit) continue;
    kept.insert(o);
    const auto b = origin + static_cast<std::int64_t>(o);
    out.push_back({{b, b + static_cast<std::int64_t>(m)}, std::max(0.0, trace[o]), -1});
  }
  return out;
}

}  // namespace

TmResult detect_tm(std::span<const Template> templates,
                   std::span<const float> waveform, const TmOptions& options) {
  if (!(options.mu > 0.0)) throw ConfigError("detect_tm: mu must be positive");
  TmResult result;
  std::vector<std::vector<Detection>> per_template(templates.size());
  std::mutex warn_mutex;
  auto run = [&](std::size_t i) {
    const Template& tp = templates[i];
    if (tp.samples.size() > waveform.size()) {
      std::lock_guard<std::mutex> lock(warn_mutex);
      result.warnings.push_back("template " + std::to_string(i) + " (" +
                                std::to_string(tp.samples.size()) +
                                " samples) is longer than the waveform; skipped");
      return;
    }
    const std::vector<double> trace = cc_trace(waveform, tp.samples, options.zero_mean);
    const double tau = options.mu * mad(trace);
    per_template[i] = thin_template(trace, tau, tp.samples.size(), options.nms_iou, 0);
  };
  const std::size_t n_threads =
      std::max<std::size_t>(1, std::min(options.threads, templates.size()));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < templates.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < templates.size(); i += n_threads) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  std::vector<Detection> all;
  for (auto& v : per_template) all.insert(all.end(), v.begin(), v.end());
  result.detections = nms(std::move(all), options.nms_iou);
  std::sort(result.warnings.begin(), result.warnings.end());
  return result;
}

}  // namespace ccrcnn
