#include "ccrcnn/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ccrcnn/config.hpp"
#include "ccrcnn/errors.hpp"

namespace ccrcnn {

static_assert(std::endian::native == std::endian::little,
              "waveform I/O assumes a little-endian host");

void SynthConfig::validate() const {
  if (length_min == 0 || length_min > length_max) {
    throw ConfigError("synth: need 0 < length_min <= length_max");
  }
  if (!(length_median > 0.0) || !(length_sigma >= 0.0)) {
    throw ConfigError("synth: length median must be positive, sigma >= 0");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be >= 0");
  if (!(amplitude_min > 0.0 && amplitude_min <= amplitude_max)) {
    throw ConfigError("synth: need 0 < amplitude_min <= amplitude_max");
  }
  if (!(frequency_min > 0.0 && frequency_min <= frequency_max &&
        frequency_max <= 0.5)) {
    throw ConfigError("synth: need 0 < frequency_min <= frequency_max <= 0.5");
  }
  if (!(rise_fraction > 0.0 && rise_fraction < 1.0)) {
    throw ConfigError("synth: rise_fraction must be in (0,1)");
  }
  if (!(support_level > 0.0 && support_level < 1.0)) {
    throw ConfigError("synth: support_level must be in (0,1)");
  }
  if (!(train_fraction >= 0.0 && val_fraction >= 0.0 &&
        train_fraction + val_fraction <= 1.0)) {
    throw ConfigError("synth: split fractions must be >= 0 and sum to <= 1");
  }
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (train, val, test)");
}

double event_envelope(std::size_t t, std::size_t length, double rise_fraction,
                      double level) {
  if (t >= length) return 0.0;
  if (length == 1) return 1.0;
  const double last = static_cast<double>(length - 1);
  const double peak = std::max(1.0, std::round(rise_fraction * last));
  const double x = static_cast<double>(t);
  if (x <= peak) return level + (1.0 - level) * x / peak;
  // exp(-rate (x - peak)) hits `level` exactly at x = last.
  const double rate = -std::log(level) / (last - peak);
  return std::exp(-rate * (x - peak));
}

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::lognormal_distribution<double> length_dist(std::log(config.length_median),
                                                  config.length_sigma);
  std::vector<std::size_t> lengths(config.event_count);
  for (auto& len : lengths) {
    const double v = std::round(length_dist(rng));
    len = static_cast<std::size_t>(std::clamp(
        v, static_cast<double>(config.length_min),
        static_cast<double>(config.length_max)));
  }
  const std::size_t occupied =
      std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}) +
      (config.event_count + 1) * config.min_gap;
  if (occupied > config.total_length) {
    throw ConfigError("synth: " + std::to_string(config.event_count) +
                      " events need " + std::to_string(occupied) +
                      " samples including gaps, only " +
                      std::to_string(config.total_length) + " available");
  }
  // Spread the slack over the n + 1 gaps with exponential weights.
  const std::size_t slack = config.total_length - occupied;
  std::exponential_distribution<double> gap_dist(1.0);
  std::vector<double> weights(config.event_count + 1);
  for (auto& w : weights) w = gap_dist(rng);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> gaps(weights.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    gaps[i] = static_cast<std::size_t>(std::floor(slack * weights[i] / wsum));
    used += gaps[i];
  }
  gaps.back() += slack - used;

  Dataset ds;
  ds.generator = config;
  ds.waveform.assign(config.total_length, 0.0f);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> signal(config.total_length, 0.0);
  for (auto& v : signal) v = config.noise_sigma * noise(rng);

  std::uniform_real_distribution<double> amp(config.amplitude_min,
                                             config.amplitude_max);
  std::uniform_real_distribution<double> freq(config.frequency_min,
                                              config.frequency_max);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < config.event_count; ++i) {
    cursor += config.min_gap + gaps[i];
    const std::size_t len = lengths[i];
    const double a = amp(rng);
    const double f = freq(rng);
    const double ph = phase(rng);
    std::int64_t lo = -1;
    std::int64_t hi = -1;
    for (std::size_t t = 0; t < len; ++t) {
      const double env =
          event_envelope(t, len, config.rise_fraction, config.support_level);
      // Annotation is the envelope support at the configured level.
      if (env >= config.support_level * (1.0 - 1e-12)) {
        if (lo < 0) lo = static_cast<std::int64_t>(t);
        hi = static_cast<std::int64_t>(t) + 1;
      }
      signal[cursor + t] += a * env * std::sin(2.0 * M_PI * f * static_cast<double>(t) + ph);
    }
    if (lo != 0 || hi != static_cast<std::int64_t>(len)) {
      throw NumericalError("synth: envelope support disagrees with event length");
    }
    ds.events.push_back({static_cast<std::int64_t>(cursor),
                         static_cast<std::int64_t>(cursor + len)});
    cursor += len;
  }
  for (std::size_t i = 0; i < signal.size(); ++i) {
    ds.waveform[i] = static_cast<float>(signal[i]);
  }

  const std::size_t n = config.event_count;
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * n));
  const auto n_val = std::min(
      n - n_train, static_cast<std::size_t>(std::llround(config.val_fraction * n)));
  for (std::size_t i = 0; i < n; ++i) {
    const int s = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    ds.splits[s].push_back(i);
  }
  return ds;
}

SplitView split_view(const Dataset& dataset, Split split) {
  const auto& idx = dataset.split(split);
  const auto total = static_cast<std::int64_t>(dataset.waveform.size());
  SplitView view;
  if (idx.empty()) {
    view.region = {0, 0};
    return view;
  }
  const std::size_t first = idx.front();
  const std::size_t last = idx.back();
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (idx[i] != idx[i - 1] + 1) {
      throw DataError(std::string("split '") + split_name(split) +
                      "' is not a contiguous event range");
    }
  }
  const auto& ev = dataset.events;
  view.region.begin = first == 0 ? 0 : (ev[first - 1].end + ev[first].begin) / 2;
  view.region.end =
      last + 1 == ev.size() ? total : (ev[last].end + ev[last + 1].begin) / 2;
  for (std::size_t i = first; i <= last; ++i) view.events.push_back(ev[i]);
  return view;
}

std::vector<std::size_t> segment_offsets(std::size_t total_length,
                                         std::size_t segment_length,
                                         double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw ConfigError("segment: overlap must be in [0,1)");
  }
  if (segment_length == 0 || segment_length > total_length) {
    throw ConfigError("segment: length " + std::to_string(segment_length) +
                      " does not fit a waveform of " +
                      std::to_string(total_length) + " samples");
  }
  const auto step = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround((1.0 - overlap) * static_cast<double>(segment_length))));
  std::vector<std::size_t> offsets;
  for (std::size_t o = 0; o + segment_length <= total_length; o += step) {
    offsets.push_back(o);
  }
  if (offsets.back() + segment_length < total_length) {
    offsets.push_back(total_length - segment_length);
  }
  return offsets;
}

std::vector<Segment> segment_waveform(std::span<const float> waveform,
                                      std::size_t segment_length,
                                      double overlap) {
  std::vector<Segment> out;
  for (std::size_t o : segment_offsets(waveform.size(), segment_length, overlap)) {
    out.push_back({o, std::vector<float>(waveform.begin() + o,
                                         waveform.begin() + o + segment_length)});
  }
  return out;
}

std::vector<float> normalize_segment(std::span<const float> segment) {
  std::vector<float> out(segment.size(), 0.0f);
  if (segment.empty()) return out;
  double mean = 0.0;
  for (float v : segment) mean += v;
  mean /= static_cast<double>(segment.size());
  double var = 0.0;
  for (float v : segment) var += (v - mean) * (v - mean);
  var /= static_cast<double>(segment.size());
  const double inv = 1.0 / std::sqrt(std::max(var, 1e-12));
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out[i] = static_cast<float>((segment[i] - mean) * inv);
  }
  return out;
}

WindowTruth window_truth(std::span<const Interval> events, std::int64_t begin,
                         std::size_t length) {
  const std::int64_t end = begin + static_cast<std::int64_t>(length);
  WindowTruth out;
  auto it = std::lower_bound(
      events.begin(), events.end(), begin,
      [](const Interval& e, std::int64_t b) { return e.end <= b; });
  for (; it != events.end() && it->begin < end; ++it) {
    const Interval local{it->begin - begin, it->end - begin};
    if (it->begin >= begin && it->end <= end) {
      out.inside.push_back(local);
    } else {
      out.truncated.push_back(local);
    }
  }
  return out;
}

// --------------------------------------------------------------- file I/O

namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void save_waveform(const std::filesystem::path& path, std::span<const float> w) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write("WV1D", 4);
  const auto n = static_cast<std::uint32_t>(w.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(float)));
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<float> load_waveform(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_all(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "WV1D", 4) != 0) {
    throw DataError(path.string() + ": bad magic at byte 0 (expected WV1D)");
  }
  if (bytes.size() < 8) {
    throw DataError(path.string() + ": truncated header at byte 4");
  }
  std::uint32_t n = 0;
  std::memcpy(&n, bytes.data() + 4, 4);
  const std::size_t need = 8 + static_cast<std::size_t>(n) * sizeof(float);
  if (bytes.size() < need) {
    throw DataError(path.string() + ": truncated samples at byte " +
                    std::to_string(bytes.size()) + " (header promises " +
                    std::to_string(n) + " samples)");
  }
  if (bytes.size() > need) {
    throw DataError(path.string() + ": trailing bytes at byte " +
                    std::to_string(need));
  }
  std::vector<float> w(n);
  std::memcpy(w.data(), bytes.data() + 8, n * sizeof(float));
  return w;
}

void save_events(const std::filesystem::path& path,
                 std::span<const Interval> events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "begin,end\n";
  for (const auto& e : events) out << e.begin << ',' << e.end << '\n';
}

std::vector<Interval> load_events(const std::filesystem::path& path) {
  const std::vector<char> bytes = read_all(path);
  const std::string text(bytes.begin(), bytes.end());
  std::vector<Interval> events;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg, std::size_t at) {
    throw DataError(path.string() + ": line " + std::to_string(line_no) +
                    " (byte " + std::to_string(at) + "): " + msg);
  };
  while (pos < text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string line = text.substr(pos, eol - pos);
    const std::size_t at = pos;
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "begin,end") fail("expected header 'begin,end'", at);
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) fail("expected 'begin,end'", at);
    Interval e;
    try {
      std::size_t used = 0;
      e.begin = std::stoll(line.substr(0, comma), &used);
      if (used != comma) fail("malformed begin", at);
      const std::string rest = line.substr(comma + 1);
      e.end = std::stoll(rest, &used);
      if (used != rest.size()) fail("malformed end", at);
    } catch (const std::invalid_argument&) {
      fail("non-integer field", at);
    } catch (const std::out_of_range&) {
      fail("integer out of range", at);
    }
    if (e.begin >= e.end) fail("begin >= end", at);
    if (e.begin < 0) fail("negative begin", at);
    if (!events.empty() && e.begin < events.back().end) {
      fail("events unsorted or overlapping", at);
    }
    events.push_back(e);
  }
  if (line_no == 0) throw DataError(path.string() + ": empty file (no header)");
  return events;
}

void save_detections(const std::filesystem::path& path,
                     std::span<const Detection> detections) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "begin,end,score,scale\n";
  char score[32];
  for (const auto& d : detections) {
    std::snprintf(score, sizeof score, "%.6f", d.score);
    out << d.interval.begin << ',' << d.interval.end << ',' << score << ','
        << d.scale_index << '\n';
  }
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<Detection> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "begin,end,score,scale") {
        throw DataError(path.string() + ": expected header 'begin,end,score,scale'");
      }
      continue;
    }
    if (line.empty()) continue;
    Detection d;
    char extra = 0;
    long long b = 0, e = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lf,%d%c", &b, &e, &d.score,
                    &d.scale_index, &extra) != 4) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": malformed detection row");
    }
    d.interval = {b, e};
    if (!d.interval.valid() || !(d.score >= 0.0 && d.score <= 1.0)) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) +
                      ": invalid interval or score");
    }
    out.push_back(d);
  }
  return out;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  save_waveform(dir / "waveform.wv1d", dataset.waveform);
  save_events(dir / "events.csv", dataset.events);
  nlohmann::ordered_json m;
  m["waveform"] = "waveform.wv1d";
  m["events"] = "events.csv";
  m["splits"] = {{"train", dataset.split(Split::kTrain)},
                 {"val", dataset.split(Split::kVal)},
                 {"test", dataset.split(Split::kTest)}};
  m["generator_config"] = config_to_json(dataset.generator);
  m["seed"] = dataset.generator.seed;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  const std::vector<char> bytes = read_all(manifest);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(manifest.string() + ": " + e.what());
  }
  const auto base = manifest.parent_path();
  Dataset ds;
  try {
    ds.waveform = load_waveform(base / m.at("waveform").get<std::string>());
    ds.events = load_events(base / m.at("events").get<std::string>());
    const auto& splits = m.at("splits");
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      ds.splits[static_cast<int>(s)] =
          splits.at(split_name(s)).get<std::vector<std::size_t>>();
    }
    if (m.contains("generator_config")) {
      config_from_json(m.at("generator_config"), ds.generator);
    }
    ds.generator.seed = m.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest.string() + ": " + e.what());
  }
  for (const auto& split : ds.splits) {
    for (std::size_t i : split) {
      if (i >= ds.events.size()) {
        throw DataError(manifest.string() + ": split references event " +
                        std::to_string(i) + " of " +
                        std::to_string(ds.events.size()));
      }
    }
  }
  if (!ds.events.empty() &&
      ds.events.back().end > static_cast<std::int64_t>(ds.waveform.size())) {
    throw DataError(manifest.string() + ": events extend past the waveform");
  }
  return ds;
}

}  // namespace ccrcnn
