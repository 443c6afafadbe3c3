#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ccrcnn/geomeval.hpp"
#include "support/oracles.hpp"

namespace ccrcnn {
namespace {

Detection det(std::int64_t b, std::int64_t e, double score, int scale = 0) {
  return {{b, e}, score, scale};
}

TEST(Iou, WorkedExamples) {
  EXPECT_EQ(iou_1d(Interval{0, 10}, Interval{0, 10}), 1.0);
  EXPECT_EQ(iou_1d(Interval{0, 10}, Interval{20, 30}), 0.0);
  EXPECT_DOUBLE_EQ(iou_1d(Interval{0, 10}, Interval{5, 15}), 1.0 / 3.0);
}

TEST(Iou, PropertiesAndOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> b(-200, 200), w(1, 150), shift(-1000, 1000);
  for (int i = 0; i < 1000; ++i) {
    const Interval x{b(rng), 0}, y{b(rng), 0};
    const Interval a{x.begin, x.begin + w(rng)}, c{y.begin, y.begin + w(rng)};
    const double v = iou_1d(a, c);
    EXPECT_EQ(v, oracle::iou(a, c));
    EXPECT_EQ(v, iou_1d(c, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v == 1.0, a == c);
    const std::int64_t s = shift(rng);
    EXPECT_EQ(v, iou_1d(Interval{a.begin + s, a.end + s}, Interval{c.begin + s, c.end + s}));
    EXPECT_DOUBLE_EQ(v, iou_1d(double(a.begin), double(a.end), double(c.begin), double(c.end)));
  }
}

TEST(Nms, WorkedExamples) {
  EXPECT_EQ(nms({det(0, 10, 0.5)}, 0.05).size(), 1u);
  const auto same = nms({det(0, 10, 0.8), det(0, 10, 0.9)}, 0.05);
  ASSERT_EQ(same.size(), 1u);
  EXPECT_EQ(same[0].score, 0.9);
  EXPECT_EQ(nms({det(0, 10, 0.8), det(20, 30, 0.9)}, 0.05).size(), 2u);
  EXPECT_THROW(nms({}, 1.5), ConfigError);
}

std::vector<Detection> random_dets(std::mt19937_64& rng, std::size_t n, std::int64_t extent) {
  std::uniform_int_distribution<std::int64_t> b(0, extent), w(5, 200);
  std::uniform_int_distribution<int> sc(0, 19), scale(0, 2);
  std::vector<Detection> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t s = b(rng);
    out.push_back(det(s, s + w(rng), sc(rng) / 20.0, scale(rng)));  // coarse scores: ties happen
  }
  return out;
}

TEST(Nms, MatchesOracleOnRandomSets) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 1000; ++t) {
    const auto cands = random_dets(rng, 1 + rng() % 30, 1000);
    const double thr = (t % 3 == 0) ? 0.05 : 0.3;
    const auto kept = nms(cands, thr);
    ASSERT_EQ(kept, oracle::nms(cands, thr)) << "trial " << t;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      EXPECT_NE(std::find(cands.begin(), cands.end(), kept[i]), cands.end());
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        EXPECT_LE(iou_1d(kept[i].interval, kept[j].interval), thr);
      }
    }
  }
}

TEST(Matching, WorkedExamples) {
  const std::vector<Interval> one{{0, 100}};
  const std::vector<Detection> exact{det(0, 100, 0.9)};
  EXPECT_EQ(match_detections(exact, one, 0.5), std::vector<bool>{true});
  const std::vector<Detection> twice{det(0, 100, 0.9), det(5, 100, 0.8)};
  EXPECT_EQ(match_detections(twice, one, 0.5), (std::vector<bool>{true, false}));
  const std::vector<Interval> two{{0, 100}, {500, 600}};
  const std::vector<Detection> mixed{det(0, 100, 0.9), det(250, 350, 0.8), det(500, 600, 0.7)};
  EXPECT_EQ(match_detections(mixed, two, 0.5), (std::vector<bool>{true, false, true}));
}

TEST(Matching, ConsumesTheBestFreeEvent) {
  const std::vector<Interval> gts{{0, 100}, {10, 110}};
  const std::vector<Detection> d{det(10, 110, 0.9), det(10, 110, 0.8)};
  EXPECT_EQ(match_detections(d, gts, 0.5), (std::vector<bool>{true, true}));
}

TEST(AveragePrecision, WorkedExamples) {
  const std::vector<Interval> two{{0, 100}, {500, 600}};
  const std::vector<Detection> mixed{det(0, 100, 0.9), det(250, 350, 0.8), det(500, 600, 0.7)};
  EXPECT_NEAR(average_precision(mixed, two, 0.5), 5.0 / 6.0, 1e-12);
  const std::vector<Detection> perfect{det(0, 100, 0.9), det(500, 600, 0.8)};
  EXPECT_EQ(average_precision(perfect, two, 0.5), 1.0);
  const std::vector<Detection> wrong{det(200, 300, 0.9)};
  EXPECT_EQ(average_precision(wrong, two, 0.5), 0.0);
  EXPECT_THROW(average_precision(perfect, {}, 0.5), ConfigError);
}

TEST(AveragePrecision, MatchesBruteForceOracle) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n_gt = 1 + rng() % 6;
    std::vector<Interval> gts;
    for (std::size_t g = 0; g < n_gt; ++g) {
      const std::int64_t b = static_cast<std::int64_t>(g) * 300 + static_cast<std::int64_t>(rng() % 100);
      gts.push_back({b, b + 50 + static_cast<std::int64_t>(rng() % 150)});
    }
    const auto dets = random_dets(rng, rng() % 13, 1800);
    for (std::size_t k = 0; k < kNumIouThresholds; ++k) {
      const double tau = iou_threshold(k);
      ASSERT_EQ(average_precision(dets, gts, tau), oracle::average_precision(dets, gts, tau))
          << "instance " << t << " tau " << tau;
    }
  }
}

TEST(AveragePrecision, MonotoneScoreTransformInvariant) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const std::vector<Interval> gts{{0, 200}, {400, 500}, {900, 1200}};
    auto dets = random_dets(rng, 10, 1200);
    for (auto& d : dets) d.score = 0.05 + 0.9 * d.score;
    auto warped = dets;
    for (auto& d : warped) d.score = std::exp(3.0 * d.score) - 0.5;
    for (double tau : {0.5, 0.75, 0.95}) {
      EXPECT_EQ(average_precision(dets, gts, tau), average_precision(warped, gts, tau));
    }
  }
}

TEST(ApRange, PerfectAndEmpty) {
  const std::vector<Interval> gts{{0, 100}, {300, 420}};
  const EvalReport p = ap_range({det(0, 100, 0.9), det(300, 420, 0.6)}, gts);
  for (double ap : p.ap_per_threshold) EXPECT_EQ(ap, 1.0);
  EXPECT_EQ(p.map, 1.0);
  const EvalReport e = ap_range({}, gts);
  for (std::size_t k = 0; k < kNumIouThresholds; ++k) {
    EXPECT_EQ(e.ap_per_threshold[k], 0.0);
    EXPECT_EQ(e.missed[k], 2u);
  }
  EXPECT_EQ(e.map, 0.0);
}

// Every detection is its event shifted so the IoU is exactly 0.6:
// width 100, shift s gives (100 - s) / (100 + s) = 0.6 at s = 25.
TEST(ApRange, ShiftedToSixTenths) {
  std::vector<Interval> gts;
  std::vector<Detection> dets;
  for (int i = 0; i < 8; ++i) {
    gts.push_back({i * 1000, i * 1000 + 100});
    dets.push_back(det(i * 1000 + 25, i * 1000 + 125, 0.9 - 0.05 * i));
    ASSERT_DOUBLE_EQ(iou_1d(gts.back(), dets.back().interval), 0.6);
  }
  const EvalReport r = ap_range(dets, gts);
  for (std::size_t k = 0; k < kNumIouThresholds; ++k) {
    EXPECT_EQ(r.ap_per_threshold[k], iou_threshold(k) <= 0.6 + 1e-12 ? 1.0 : 0.0) << k;
    EXPECT_EQ(r.ap_per_threshold[k], oracle::average_precision(dets, gts, iou_threshold(k)));
  }
  EXPECT_NEAR(r.map, 0.3, 1e-12);
}

TEST(ApRange, MeanIsTheAverageAndJsonRoundTrips) {
  std::mt19937_64 rng(4);
  const std::vector<Interval> gts{{0, 200}, {400, 500}, {900, 1200}};
  const EvalReport r = ap_range(random_dets(rng, 12, 1200), gts);
  double sum = 0;
  for (double ap : r.ap_per_threshold) sum += ap;
  EXPECT_NEAR(r.map, sum / 10.0, 1e-15);
  const EvalReport back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.ap_per_threshold, r.ap_per_threshold);
  EXPECT_EQ(back.map, r.map);
  EXPECT_EQ(back.tp, r.tp);
  EXPECT_EQ(back.fp, r.fp);
  EXPECT_EQ(back.missed, r.missed);
  EXPECT_THROW(EvalReport::from_json("{\"map\": 1}"), DataError);
}

TEST(ApRange, CocoModeOnPerfectDetector) {
  const std::vector<Interval> gts{{0, 100}};
  EXPECT_EQ(average_precision({det(0, 100, 0.9)}, gts, 0.5, ApInterpolation::kCoco101), 1.0);
}

}  // namespace
}  // namespace ccrcnn
