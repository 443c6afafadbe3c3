#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ccrcnn/config.hpp"
#include "ccrcnn/dataio.hpp"
#include "ccrcnn/errors.hpp"

namespace ccrcnn {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ccrcnn_dataio_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig c;
  c.total_length = 200'000;
  c.event_count = 60;
  c.seed = seed;
  return c;
}

TEST(Segments, WorkedExamples) {
  EXPECT_EQ(segment_offsets(100, 40, 0.5), (std::vector<std::size_t>{0, 20, 40, 60}));
  EXPECT_EQ(segment_offsets(120, 40, 0.0), (std::vector<std::size_t>{0, 40, 80}));
  EXPECT_EQ(segment_offsets(100, 40, 0.0), (std::vector<std::size_t>{0, 40, 60}));
  EXPECT_EQ(segment_offsets(77, 77, 0.5), (std::vector<std::size_t>{0}));
  EXPECT_THROW(segment_offsets(10, 20, 0.5), ConfigError);
  EXPECT_THROW(segment_offsets(100, 20, 1.0), ConfigError);
}

// Every sample is covered; interior samples ceil(1/(1-o)) times or one fewer.
// Segment lengths are multiples of 4 so the stride is exact.
TEST(Segments, CoverageProperty) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t seg = 4 * (2 + rng() % 50);
    const std::size_t total = seg + rng() % 3000;
    const double overlap = std::vector<double>{0.0, 0.25, 0.5, 0.75}[rng() % 4];
    const auto offs = segment_offsets(total, seg, overlap);
    std::vector<int> cover(total, 0);
    for (std::size_t o : offs) {
      ASSERT_LE(o + seg, total);
      for (std::size_t i = o; i < o + seg; ++i) ++cover[i];
    }
    const int k = static_cast<int>(std::ceil(1.0 / (1.0 - overlap) - 1e-12));
    for (std::size_t i = 0; i < total; ++i) ASSERT_GE(cover[i], 1) << i;
    // Away from both ends only the regular stride contributes.
    for (std::size_t i = seg; i + seg < total; ++i) {
      ASSERT_TRUE(cover[i] == k || cover[i] == k - 1) << "sample " << i << " cover " << cover[i];
    }
  }
}

TEST(Segments, WaveformSlicesMatchOffsets) {
  std::vector<float> w(100);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(i);
  const auto segs = segment_waveform(w, 40, 0.5);
  ASSERT_EQ(segs.size(), 4u);
  EXPECT_EQ(segs[3].offset, 60u);
  EXPECT_EQ(segs[3].samples.front(), 60.0f);
  EXPECT_EQ(segs[3].samples.back(), 99.0f);
}

TEST(Normalize, WorkedExamples) {
  EXPECT_EQ(normalize_segment(std::vector<float>{1, 1, 1}), (std::vector<float>{0, 0, 0}));
  EXPECT_EQ(normalize_segment(std::vector<float>{0, 2}), (std::vector<float>{-1, 1}));
}

TEST(Normalize, ZeroMeanUnitPopulationVariance) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> d(3.0f, 7.0f);
  for (int t = 0; t < 50; ++t) {
    std::vector<float> x(1 + rng() % 5000);
    if (x.size() == 1) x.push_back(0.0f);
    for (float& v : x) v = d(rng);
    const auto y = normalize_segment(x);
    double mean = 0, var = 0;
    for (float v : y) mean += v;
    mean /= y.size();
    for (float v : y) var += (v - mean) * (v - mean);
    var /= y.size();
    // float output: the definition holds to single precision.
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-6);
  }
}

TEST(Window, InsideAndTruncated) {
  const std::vector<Interval> ev{{0, 50}, {100, 150}, {180, 260}, {300, 320}};
  const WindowTruth w = window_truth(ev, 90, 120);
  EXPECT_EQ(w.inside, (std::vector<Interval>{{10, 60}}));
  EXPECT_EQ(w.truncated, (std::vector<Interval>{{90, 170}}));
  const WindowTruth all = window_truth(ev, 0, 400);
  EXPECT_EQ(all.inside, ev);
  const WindowTruth none = window_truth(ev, 50, 50);
  EXPECT_TRUE(none.inside.empty());
  EXPECT_TRUE(none.truncated.empty());
}

TEST(Envelope, SupportBoundsAtTheLevel) {
  for (std::size_t len : {200u, 777u, 1500u, 8192u}) {
    EXPECT_NEAR(event_envelope(0, len, 0.1, 0.05), 0.05, 1e-12);
    EXPECT_NEAR(event_envelope(len - 1, len, 0.1, 0.05), 0.05, 1e-12);
    EXPECT_EQ(event_envelope(len, len, 0.1, 0.05), 0.0);
    double peak = 0;
    for (std::size_t t = 0; t < len; ++t) {
      const double v = event_envelope(t, len, 0.1, 0.05);
      EXPECT_GE(v, 0.05 * (1 - 1e-12));
      peak = std::max(peak, v);
    }
    EXPECT_DOUBLE_EQ(peak, 1.0);
  }
}

TEST(Synth, NoEventsIsPureNoise) {
  SynthConfig c = small_synth(3);
  c.event_count = 0;
  const Dataset d = generate_synthetic(c);
  EXPECT_TRUE(d.events.empty());
  EXPECT_EQ(d.waveform.size(), c.total_length);
  double ss = 0;
  for (float v : d.waveform) ss += double(v) * v;
  EXPECT_NEAR(std::sqrt(ss / d.waveform.size()), c.noise_sigma, 0.01 * c.noise_sigma);
}

TEST(Synth, SameSeedIsBitIdentical) {
  const Dataset a = generate_synthetic(small_synth(7));
  const Dataset b = generate_synthetic(small_synth(7));
  const Dataset other = generate_synthetic(small_synth(8));
  EXPECT_EQ(a.waveform, b.waveform);
  EXPECT_EQ(a.events, b.events);
  EXPECT_NE(a.waveform, other.waveform);
}

TEST(Synth, PackingInvariants) {
  const SynthConfig c = small_synth(11);
  const Dataset d = generate_synthetic(c);
  ASSERT_EQ(d.events.size(), c.event_count);
  std::int64_t prev_end = 0;
  for (const auto& e : d.events) {
    EXPECT_GE(e.width(), static_cast<std::int64_t>(c.length_min));
    EXPECT_LE(e.width(), static_cast<std::int64_t>(c.length_max));
    EXPECT_GE(e.begin - prev_end, static_cast<std::int64_t>(c.min_gap));
    prev_end = e.end;
  }
  EXPECT_LE(prev_end + static_cast<std::int64_t>(c.min_gap),
            static_cast<std::int64_t>(c.total_length));
}

TEST(Synth, InfeasiblePackingRejected) {
  SynthConfig c = small_synth(0);
  c.total_length = 10'000;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
}

TEST(Synth, DefaultMedianLength) {
  const Dataset d = generate_synthetic(SynthConfig{});
  ASSERT_EQ(d.events.size(), 1000u);
  std::vector<std::int64_t> w;
  for (const auto& e : d.events) w.push_back(e.width());
  std::sort(w.begin(), w.end());
  const double median = 0.5 * double(w[499] + w[500]);
  EXPECT_NEAR(median, 1500.0, 150.0);
  EXPECT_EQ(d.split(Split::kTrain).size(), 800u);
  EXPECT_EQ(d.split(Split::kVal).size(), 100u);
  EXPECT_EQ(d.split(Split::kTest).size(), 100u);
}

TEST(Synth, SplitViewsTileTheWaveform) {
  const Dataset d = generate_synthetic(small_synth(2));
  const SplitView tr = split_view(d, Split::kTrain);
  const SplitView va = split_view(d, Split::kVal);
  const SplitView te = split_view(d, Split::kTest);
  EXPECT_EQ(tr.region.begin, 0);
  EXPECT_EQ(tr.region.end, va.region.begin);
  EXPECT_EQ(va.region.end, te.region.begin);
  EXPECT_EQ(te.region.end, static_cast<std::int64_t>(d.waveform.size()));
  for (const SplitView* v : {&tr, &va, &te}) {
    for (const auto& e : v->events) {
      EXPECT_GE(e.begin, v->region.begin);
      EXPECT_LE(e.end, v->region.end);
    }
  }
  EXPECT_EQ(tr.events.size() + va.events.size() + te.events.size(), d.events.size());
  EXPECT_EQ(parse_split("val"), Split::kVal);
  EXPECT_THROW(parse_split("dev"), ConfigError);
}

TEST(Files, WaveformRoundTrip) {
  const fs::path dir = scratch("wave");
  std::mt19937_64 rng(0);
  std::normal_distribution<float> d;
  std::vector<float> w(1234);
  for (float& v : w) v = d(rng);
  w[5] = -0.0f;
  save_waveform(dir / "a.wv1d", w);
  const auto back = load_waveform(dir / "a.wv1d");
  ASSERT_EQ(back.size(), w.size());
  EXPECT_EQ(std::memcmp(back.data(), w.data(), w.size() * sizeof(float)), 0);
  EXPECT_EQ(fs::file_size(dir / "a.wv1d"), 8 + 4 * w.size());
  save_waveform(dir / "empty.wv1d", {});
  EXPECT_TRUE(load_waveform(dir / "empty.wv1d").empty());
}

TEST(Files, WaveformRejectsBadFiles) {
  const fs::path dir = scratch("wavebad");
  write_text(dir / "magic.wv1d", std::string("WAVE\0\0\0\0", 8));
  EXPECT_NE(error_of([&] { load_waveform(dir / "magic.wv1d"); }).find("bad magic"),
            std::string::npos);
  save_waveform(dir / "t.wv1d", std::vector<float>(10, 1.0f));
  fs::resize_file(dir / "t.wv1d", 8 + 4 * 7);
  const std::string msg = error_of([&] { load_waveform(dir / "t.wv1d"); });
  EXPECT_NE(msg.find("truncated"), std::string::npos) << msg;
  EXPECT_NE(msg.find("byte 36"), std::string::npos) << msg;
  write_text(dir / "short.wv1d", "WV1D\1");
  EXPECT_NE(error_of([&] { load_waveform(dir / "short.wv1d"); }).find("truncated"),
            std::string::npos);
  EXPECT_THROW(load_waveform(dir / "missing.wv1d"), DataError);
}

TEST(Files, EventsRoundTripAndRejection) {
  const fs::path dir = scratch("events");
  const std::vector<Interval> ev{{0, 10}, {10, 25}, {400, 9000}};
  save_events(dir / "e.csv", ev);
  EXPECT_EQ(load_events(dir / "e.csv"), ev);

  write_text(dir / "eq.csv", "begin,end\n5,5\n");
  EXPECT_NE(error_of([&] { load_events(dir / "eq.csv"); }).find("begin >= end"),
            std::string::npos);
  write_text(dir / "unsorted.csv", "begin,end\n100,200\n0,50\n");
  const std::string msg = error_of([&] { load_events(dir / "unsorted.csv"); });
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("byte 18"), std::string::npos) << msg;
  write_text(dir / "overlap.csv", "begin,end\n0,50\n49,60\n");
  EXPECT_NE(error_of([&] { load_events(dir / "overlap.csv"); }).find("overlapping"),
            std::string::npos);
  write_text(dir / "header.csv", "start,stop\n0,1\n");
  EXPECT_THROW(load_events(dir / "header.csv"), DataError);
  write_text(dir / "junk.csv", "begin,end\n0,1x\n");
  EXPECT_THROW(load_events(dir / "junk.csv"), DataError);
}

TEST(Files, DetectionsRoundTrip) {
  const fs::path dir = scratch("dets");
  const std::vector<Detection> d{{{0, 100}, 0.5, 0}, {{250, 300}, 0.123456, 2},
                                 {{7, 9}, 1.0, -1}};
  save_detections(dir / "d.csv", d);
  EXPECT_EQ(load_detections(dir / "d.csv"), d);
  write_text(dir / "bad.csv", "begin,end,score,scale\n0,10,1.5,0\n");
  EXPECT_THROW(load_detections(dir / "bad.csv"), DataError);
}

TEST(Files, DatasetRoundTrip) {
  const fs::path dir = scratch("dataset");
  const Dataset d = generate_synthetic(small_synth(21));
  save_dataset(dir, d);
  const Dataset back = load_dataset(dir / "manifest.json");
  EXPECT_EQ(back.waveform, d.waveform);
  EXPECT_EQ(back.events, d.events);
  for (int s = 0; s < 3; ++s) EXPECT_EQ(back.splits[s], d.splits[s]);
  EXPECT_EQ(back.generator.seed, 21u);
  EXPECT_EQ(back.generator.total_length, d.generator.total_length);
  EXPECT_EQ(nlohmann::json(config_to_json(back.generator)),
            nlohmann::json(config_to_json(d.generator)));

  std::ifstream in(dir / "manifest.json");
  nlohmann::json m = nlohmann::json::parse(in);
  m["splits"]["test"].push_back(100000);
  write_text(dir / "manifest.json", m.dump());
  EXPECT_THROW(load_dataset(dir / "manifest.json"), DataError);
  write_text(dir / "manifest.json", "{not json");
  EXPECT_THROW(load_dataset(dir / "manifest.json"), DataError);
}

TEST(Config, UnknownKeysRejectedByName) {
  try {
    run_config_from_json(nlohmann::json::parse(R"({"train": {"epochz": 3}})"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epochz"), std::string::npos) << e.what();
  }
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"colour": 1})")), ConfigError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"preset": "huge"})")),
               ConfigError);
}

TEST(Config, JsonRoundTripAndPresets) {
  RunConfig c = RunConfig::from_preset("full");
  c.train.epochs = 7;
  c.synth.seed = 42;
  const RunConfig back = run_config_from_json(nlohmann::json(config_to_json(c)));
  EXPECT_EQ(nlohmann::json(config_to_json(back)), nlohmann::json(config_to_json(c)));
  EXPECT_EQ(back.preset, "full");
  EXPECT_EQ(back.train.epochs, 7u);
  // Missing keys keep the preset defaults.
  const RunConfig desk = run_config_from_json(nlohmann::json::object());
  EXPECT_EQ(nlohmann::json(config_to_json(desk)),
            nlohmann::json(config_to_json(RunConfig::from_preset("desk"))));
}

}  // namespace
}  // namespace ccrcnn
