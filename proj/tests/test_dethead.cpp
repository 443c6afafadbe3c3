#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ccrcnn/dethead.hpp"
#include "ccrcnn/gradsuite.hpp"
#include "support/oracles.hpp"

namespace ccrcnn {
namespace {

// ------------------------------------------------------------------ anchors

TEST(Anchors, FirstScaleOfTheFullPreset) {
  const auto a = generate_anchors(24576, 16, 128, 0);
  ASSERT_EQ(a.size(), 1536u);
  EXPECT_EQ(a[0].center, 0.0);
  EXPECT_EQ(a[1].center, 16.0);
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a[j].width, 128.0);
    EXPECT_EQ(a[j].node_index, j);
    if (j > 0) {
      EXPECT_EQ(a[j].center - a[j - 1].center, 16.0);
    }
  }
}

TEST(Anchors, CoarsestScaleAndSingleNode) {
  const auto a = generate_anchors(24576, 1024, 8192, 6);
  EXPECT_EQ(a.size(), 24u);
  EXPECT_EQ(a.back().scale_index, 6u);
  EXPECT_EQ(generate_anchors(64, 64, 768, 2).size(), 1u);
  EXPECT_THROW(generate_anchors(100, 64, 768, 2), ConfigError);
}

TEST(Anchors, FullPresetSizesDoublePerScale) {
  const HeadConfig h = HeadConfig::full();
  for (std::size_t s = 0; s < 7; ++s) EXPECT_EQ(h.anchor_sizes[s], 128.0 * (1 << s));
  EXPECT_EQ(h.proposal_quotas, (std::vector<std::size_t>{64, 64, 64, 64, 32, 32, 16}));
}

// ------------------------------------------------------------------ labels

TEST(Labels, WorkedExamples) {
  const Anchor a{64, 128, 0, 4};
  const Interval g0{0, 128};
  auto l = assign_labels(std::span(&a, 1), std::span(&g0, 1));
  EXPECT_EQ(l[0].cls, LabelClass::kPositive);
  EXPECT_DOUBLE_EQ(l[0].best_iou, 1.0);
  EXPECT_EQ(l[0].targets.tx, 0.0);
  EXPECT_EQ(l[0].targets.tw, 0.0);

  const Anchor b{50, 100, 0, 0};
  const Interval g1{30, 130}, g2{50, 150};
  l = assign_labels(std::span(&b, 1), std::span(&g1, 1));
  EXPECT_NEAR(l[0].best_iou, 70.0 / 130.0, 1e-15);
  EXPECT_EQ(l[0].cls, LabelClass::kPositive);
  EXPECT_EQ(l[0].matched_gt, 0u);
  l = assign_labels(std::span(&b, 1), std::span(&g2, 1));
  EXPECT_NEAR(l[0].best_iou, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(l[0].cls, LabelClass::kNeutral);
  EXPECT_FALSE(l[0].matched_gt.has_value());
}

TEST(Labels, NoGroundTruthIsAllNegative) {
  const auto anchors = generate_anchors(1024, 16, 128, 0);
  for (const auto& l : assign_labels(anchors, {})) EXPECT_EQ(l.cls, LabelClass::kNegative);
}

TEST(Labels, TiesGoToTheEarlierEvent) {
  const Anchor a{100, 100, 0, 0};  // [50, 150)
  const std::vector<Interval> gts{{60, 150}, {50, 140}};
  const auto l = assign_labels(std::span(&a, 1), gts);
  EXPECT_EQ(l[0].cls, LabelClass::kPositive);
  EXPECT_EQ(l[0].matched_gt, 1u);
}

TEST(Labels, TruncatedEventsTurnNegativesNeutral) {
  const auto anchors = generate_anchors(1024, 64, 128, 0);
  const Interval cut{0, 40};
  const auto l = assign_labels(anchors, {}, 0.5, 0.3, std::span(&cut, 1));
  EXPECT_EQ(l[0].cls, LabelClass::kNeutral);  // [-64, 64)
  EXPECT_EQ(l[1].cls, LabelClass::kNeutral);  // [0, 128)
  EXPECT_EQ(l[2].cls, LabelClass::kNegative);
}

TEST(Labels, MatchesOracleAndPartitions) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pos(0, 2000), len(20, 600);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Interval> gts;
    const int n = static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      const int b = pos(rng);
      gts.push_back({b, b + len(rng)});
    }
    const auto anchors = generate_anchors(2048, 32, 64.0 * (1 + rng() % 8), 0);
    const auto labels = assign_labels(anchors, gts);
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      const auto expect = oracle::label(anchors[j], gts, 0.5, 0.3);
      ASSERT_EQ(labels[j].cls, expect.cls) << "trial " << trial << " anchor " << j;
      ASSERT_EQ(labels[j].matched_gt, expect.gt);
      if (labels[j].cls == LabelClass::kPositive) {
        EXPECT_GT(labels[j].best_iou, 0.5);
      }
      if (labels[j].cls == LabelClass::kNegative) {
        EXPECT_LT(labels[j].best_iou, 0.3);
      }
    }
  }
}

// ----------------------------------------------------------- offset codec

TEST(Codec, WorkedExamples) {
  const Anchor p{64, 128, 0, 0};
  const Offsets same = encode_offsets(p, Interval{0, 128});
  EXPECT_EQ(same.tx, 0.0);
  EXPECT_EQ(same.tw, 0.0);
  const Offsets o = encode_offsets(p, RealInterval{0, 256});
  EXPECT_DOUBLE_EQ(o.tx, 0.5);
  EXPECT_NEAR(o.tw, 0.6931471805599453, 1e-15);

  RealInterval r = decode_offsets(p, 0, 0);
  EXPECT_EQ(r.begin, 0.0);
  EXPECT_EQ(r.end, 128.0);
  r = decode_offsets(p, 0.5, std::log(2.0));
  EXPECT_NEAR(r.center(), 128.0, 1e-12);
  EXPECT_NEAR(r.width(), 256.0, 1e-12);
  r = decode_offsets(p, 0.0, -std::log(2.0));
  EXPECT_NEAR(r.width(), 64.0, 1e-12);
  EXPECT_THROW(encode_offsets(p, RealInterval{5, 5}), ConfigError);
}

TEST(Codec, WidthCapIsFlagged) {
  const Anchor p{64, 128, 0, 0};
  bool capped = false;
  const RealInterval r = decode_offsets(p, 0, 6.0, {}, &capped);
  EXPECT_TRUE(capped);
  EXPECT_NEAR(r.width(), 128.0 * std::exp(4.0), 1e-9);
  decode_offsets(p, 0, 3.9, {}, &capped);
  EXPECT_FALSE(capped);
}

TEST(Codec, ClampAndRounding) {
  const Anchor p{0, 128, 0, 0};
  const RealInterval r = decode_offsets(p, 0, 0, {4.0, 0.0, 1000.0});
  EXPECT_EQ(r.begin, 0.0);
  EXPECT_EQ(r.end, 64.0);
  EXPECT_EQ(to_interval({10.4, 20.5}), (Interval{10, 21}));
  EXPECT_EQ(to_interval({10.2, 10.3}), (Interval{10, 11}));
}

TEST(Codec, RoundTripTenThousandPairs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> center(-5000, 5000), logw(std::log(16.0), std::log(4096.0)),
      ratio(std::log(1.0 / 8), std::log(8.0));
  for (int i = 0; i < 10000; ++i) {
    const Anchor a{center(rng), std::exp(logw(rng)), 0, 0};
    const double gw = a.width * std::exp(ratio(rng));
    const double gc = a.center + center(rng) / 10;
    const RealInterval g{gc - gw / 2, gc + gw / 2};
    const Offsets t = encode_offsets(a, g);
    const auto [tx, tw] = oracle::encode(a.center, a.width, g.begin, g.end);
    ASSERT_NEAR(t.tx, tx, 1e-9);
    ASSERT_NEAR(t.tw, tw, 1e-9);
    const RealInterval back = decode_offsets(a, t.tx, t.tw);
    ASSERT_NEAR(back.begin, g.begin, 1e-9 * std::max(1.0, std::abs(g.begin)));
    ASSERT_NEAR(back.end, g.end, 1e-9 * std::max(1.0, std::abs(g.end)));
    // And the other direction, from offsets.
    const double dx = ratio(rng), dw = ratio(rng);
    const RealInterval d = decode_offsets(a, dx, dw);
    const auto [b0, b1] = oracle::decode(a.center, a.width, dx, dw);
    ASSERT_NEAR(d.begin, b0, 1e-9 * std::max(1.0, std::abs(b0)));
    ASSERT_NEAR(d.end, b1, 1e-9 * std::max(1.0, std::abs(b1)));
    const Offsets again = encode_offsets(a, d);
    ASSERT_NEAR(again.tx, dx, 1e-9);
    ASSERT_NEAR(again.tw, dw, 1e-9);
  }
}

// ------------------------------------------------------------------ losses

TEST(Loss, ClassificationValues) {
  EXPECT_NEAR(classification_loss(0, 1, 0.5), 0.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(classification_loss(0, 1, 0.5), 0.34657, 5e-6);
  EXPECT_NEAR(classification_loss(0, -1, 0.55), 0.45 * std::log(2.0), 1e-15);
  EXPECT_NEAR(classification_loss(0, -1, 0.55), 0.31192, 5e-6);
  EXPECT_TRUE(std::isfinite(classification_loss(1e6, -1, 0.5)));
  EXPECT_THROW(classification_loss(0, 0, 0.5), ConfigError);
}

TEST(Loss, HalfAlphaIsHalfLogistic) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = d(rng);
    const int t = (rng() & 1) ? 1 : -1;
    EXPECT_EQ(classification_loss(x, t, 0.5), 0.5 * logistic_loss(x, t));
  }
}

// Past the clamp the loss saturates at its value on the boundary.
TEST(Loss, LogitClamp) {
  EXPECT_EQ(classification_loss(-45.0, 1, 0.5), classification_loss(-20.0, 1, 0.5));
  EXPECT_NEAR(classification_loss(-20.0, 1, 0.5), 0.5 * logistic_loss(-20.0, 1), 0.0);
  EXPECT_LT(logistic_loss(-20.0, 1), logistic_loss(-45.0, 1));
}

TEST(Loss, ClassificationGradientByDifferences) {
  for (double x : {-3.0, -0.2, 0.0, 0.7, 5.0}) {
    for (int t : {1, -1}) {
      const double h = 1e-6;
      const double num = (classification_loss(x + h, t, 0.6) - classification_loss(x - h, t, 0.6)) / (2 * h);
      EXPECT_NEAR(classification_loss_grad(x, t, 0.6), num, 1e-8);
    }
  }
  EXPECT_EQ(classification_loss_grad(25.0, -1, 0.5), 0.0);
}

TEST(Loss, DeriveAlpha) {
  EXPECT_DOUBLE_EQ(derive_alpha(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(derive_alpha(0, 0.1), 0.55);
  EXPECT_DOUBLE_EQ(derive_alpha(0, 0.2), 0.6);
  EXPECT_THROW(derive_alpha(1.0, 0), ConfigError);
  EXPECT_THROW(derive_alpha(0, -0.1), ConfigError);
}

TEST(Loss, SmoothL1) {
  EXPECT_EQ(smooth_l1(0), 0.0);
  EXPECT_EQ(smooth_l1(0.5), 0.125);
  EXPECT_EQ(smooth_l1(2), 1.5);
  EXPECT_EQ(smooth_l1(-2), 1.5);
  EXPECT_EQ(regression_loss(1.0, 1.5), 0.125);
}

std::vector<SampledProposal> negatives(std::size_t n) {
  std::vector<SampledProposal> v(n);
  for (auto& p : v) p.t_cls = -1;
  return v;
}

TEST(JointLoss, AllNegativeIgnoresLambda) {
  const auto props = negatives(4);
  const std::vector<ProposalPrediction> preds{{0.3, 9, 9}, {-1, 2, 2}, {2, 0, 0}, {0, 1, 1}};
  LossParams lp;
  double mean = 0;
  for (const auto& p : preds) mean += classification_loss(p.d_cls, -1, 0.5) / 4;
  for (double lambda : {0.0, 1.0, 7.0}) {
    lp.lambda = lambda;
    const auto l = joint_loss(props, preds, lp);
    EXPECT_NEAR(l.value, mean, 1e-15);
    EXPECT_EQ(l.regression, 0.0);
  }
}

TEST(JointLoss, PerfectPositive) {
  const std::vector<SampledProposal> props{{0, 0, 1, {0.25, -0.5}}};
  const std::vector<ProposalPrediction> preds{{30.0, 0.25, -0.5}};
  LossParams lp;
  lp.alpha = 0.55;
  const auto l = joint_loss(props, preds, lp);
  EXPECT_LT(l.value, 1e-8 + 0.55 * std::log1p(std::exp(-20.0)));
}

TEST(JointLoss, LinearInLambda) {
  const std::vector<SampledProposal> props{{0, 0, 1, {0.25, -0.5}}, {0, 1, -1, {}}, {0, 2, 1, {1.0, 2.0}}};
  const std::vector<ProposalPrediction> preds{{0.3, 0.1, 0.4}, {-2, 5, 5}, {1, -1, 0.5}};
  LossParams lp;
  lp.lambda = 0.7;
  const auto a = joint_loss(props, preds, lp);
  lp.lambda = 1.4;
  const auto b = joint_loss(props, preds, lp);
  EXPECT_NEAR(b.value - a.value, 0.7 * a.regression, 1e-14);
  EXPECT_GT(a.regression, 0.0);
  EXPECT_THROW(joint_loss({}, {}, lp), ConfigError);
}

// --------------------------------------------------------------- sampling

std::vector<ProposalLabel> make_labels(std::size_t pos, std::size_t neg, std::size_t neutral) {
  std::vector<ProposalLabel> v;
  for (std::size_t i = 0; i < pos; ++i) v.push_back({LabelClass::kPositive, 0, 0.8, {}});
  for (std::size_t i = 0; i < neg; ++i) v.push_back({LabelClass::kNegative, {}, 0.0, {}});
  for (std::size_t i = 0; i < neutral; ++i) v.push_back({LabelClass::kNeutral, {}, 0.4, {}});
  return v;
}

std::pair<std::size_t, std::size_t> counts(const std::vector<SampledProposal>& s) {
  std::size_t p = 0;
  for (const auto& x : s) p += x.t_cls == 1;
  return {p, s.size() - p};
}

TEST(Sampling, FewPositives) {
  std::mt19937_64 rng(1);
  const std::vector<std::vector<ProposalLabel>> labels{make_labels(10, 200, 0)};
  const std::size_t quota[] = {64};
  const auto s = sample_proposals(labels, quota, rng);
  EXPECT_EQ(counts(s), (std::pair<std::size_t, std::size_t>{10, 54}));
}

TEST(Sampling, ManyPositivesSplitEvenly) {
  std::mt19937_64 rng(1);
  const std::vector<std::vector<ProposalLabel>> labels{make_labels(100, 200, 0)};
  const std::size_t quota[] = {64};
  EXPECT_EQ(counts(sample_proposals(labels, quota, rng)),
            (std::pair<std::size_t, std::size_t>{32, 32}));
}

TEST(Sampling, NeutralsTopUpNegatives) {
  std::mt19937_64 rng(1);
  const std::vector<std::vector<ProposalLabel>> labels{make_labels(0, 20, 100)};
  const std::size_t quota[] = {64};
  const auto s = sample_proposals(labels, quota, rng);
  EXPECT_EQ(counts(s), (std::pair<std::size_t, std::size_t>{0, 64}));
  std::size_t from_neutral = 0;
  for (const auto& x : s) from_neutral += x.node_index >= 20;
  EXPECT_EQ(from_neutral, 44u);
}

TEST(Sampling, PerScaleQuotasAndDeterminism) {
  const std::vector<std::vector<ProposalLabel>> labels{make_labels(3, 50, 5), make_labels(40, 10, 2)};
  const std::size_t quota[] = {16, 32};
  std::mt19937_64 a(9), b(9);
  const auto s1 = sample_proposals(labels, quota, a);
  const auto s2 = sample_proposals(labels, quota, b);
  ASSERT_EQ(s1.size(), 16u + 28u);  // scale 1: 16 pos + 10 neg + 2 neutral
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].scale_index, s2[i].scale_index);
    EXPECT_EQ(s1[i].node_index, s2[i].node_index);
  }
}

// -------------------------------------------------------------- inference

ScalePrediction flat_scale(std::size_t index, std::size_t stride, double size,
                           std::size_t nodes, double logit) {
  ScalePrediction s;
  s.scale_index = index;
  s.stride = stride;
  s.anchor_size = size;
  s.logits.assign(nodes, logit);
  s.offsets.assign(2 * nodes, 0.0);
  return s;
}

TEST(Detect, NothingAboveThreshold) {
  const std::vector<ScalePrediction> s{flat_scale(0, 16, 128, 64, -10), flat_scale(1, 32, 256, 32, -10)};
  EXPECT_TRUE(detect(s, 1024, HeadConfig::full()).empty());
}

TEST(Detect, SingleNode) {
  auto s = flat_scale(0, 16, 128, 64, -10);
  s.logits[20] = 3.0;
  s.offsets[40] = 0.1;
  s.offsets[41] = -0.2;
  const auto d = detect(std::span(&s, 1), 1024, HeadConfig::full());
  ASSERT_EQ(d.size(), 1u);
  const Interval expect = to_interval(decode_offsets({320, 128, 0, 20}, 0.1, -0.2));
  EXPECT_EQ(d[0].interval, expect);
  EXPECT_NEAR(d[0].score, 1 / (1 + std::exp(-3.0)), 1e-15);
  EXPECT_EQ(d[0].scale_index, 0);
}

TEST(Detect, OverlapHalfKeepsTheStronger) {
  auto s = flat_scale(0, 40, 120, 10, -10);
  s.logits[2] = std::log(0.9 / 0.1);  // [20, 140)
  s.logits[3] = std::log(0.7 / 0.3);  // [60, 180)
  ASSERT_DOUBLE_EQ(iou_1d(Interval{20, 140}, Interval{60, 180}), 0.5);
  const auto d = detect(std::span(&s, 1), 400, HeadConfig::full());
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].interval, (Interval{20, 140}));
  EXPECT_NEAR(d[0].score, 0.9, 1e-12);
}

std::vector<ScalePrediction> random_pyramid(std::mt19937_64& rng, std::size_t L) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ScalePrediction> out;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t stride = 64u << s;
    auto p = flat_scale(s, stride, 768.0 * (1 << s), L / stride, 0);
    for (double& v : p.logits) v = n(rng) - 0.5;
    for (double& v : p.offsets) v = 0.5 * n(rng);
    out.push_back(std::move(p));
  }
  return out;
}

TEST(Detect, NoSurvivingPairOverlaps) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto d = detect(random_pyramid(rng, 16384), 16384, HeadConfig::desk());
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_GE(d[i].score, 0.0);
      EXPECT_LE(d[i].score, 1.0);
      EXPECT_LT(d[i].interval.begin, d[i].interval.end);
      EXPECT_GE(d[i].interval.begin, 0);
      EXPECT_LE(d[i].interval.end, 16384);
      for (std::size_t j = i + 1; j < d.size(); ++j) {
        EXPECT_LE(iou_1d(d[i].interval, d[j].interval), 0.05);
      }
    }
  }
}

TEST(Detect, ScaleOrderDoesNotMatter) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    auto p = random_pyramid(rng, 16384);
    const auto a = detect(p, 16384, HeadConfig::desk());
    std::reverse(p.begin(), p.end());
    std::swap(p[0], p[1]);
    EXPECT_EQ(detect(p, 16384, HeadConfig::desk()), a);
  }
}

// ------------------------------------------------------------ NN modules

nn::Tensor<double> noise(std::size_t len, std::size_t ch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  nn::Tensor<double> t(len, ch);
  for (double& v : t.data()) v = d(rng);
  return t;
}

TEST(Context, ShapePreservedOverStackedScales) {
  ContextualBlock<double> ctx(8, {4, 8, 12});
  std::mt19937_64 rng(0);
  ctx.init(rng);
  nn::Tape<double> tape(nn::Mode::kTrain);
  const std::vector<nn::Tape<double>::Id> ids{tape.constant(noise(32, 8, 1)),
                                              tape.constant(noise(16, 8, 2))};
  const auto y = ctx.forward_stacked(tape, ids);
  EXPECT_EQ(tape.value(y).length(), 48u);
  EXPECT_EQ(tape.value(y).channels(), 8u);
  const auto single = ctx.forward(tape, ids[0]);
  EXPECT_EQ(tape.value(single).length(), 32u);
}

TEST(Context, IdentityIsRepresentable) {
  ContextualBlock<double> ctx(6, {4, 8, 12});
  std::mt19937_64 rng(0);
  ctx.init(rng);
  ctx.set_identity();
  const auto x = noise(20, 6, 3);
  for (auto mode : {nn::Mode::kTrain, nn::Mode::kInfer}) {
    nn::Tape<double> tape(mode);
    const auto y = ctx.forward(tape, tape.constant(x));
    EXPECT_EQ(tape.value(y).data(), x.data());
  }
}

TEST(Context, DilationFourReadsThreeTaps) {
  ContextualBlock<double> ctx(2, {4, 8, 12});
  std::mt19937_64 rng(4);
  ctx.init(rng);
  nn::Tensor<double> x(30, 2);
  x(15, 0) = 1.0;
  x(15, 1) = -2.0;
  nn::Tape<double> tape(nn::Mode::kInfer);
  const auto y = tape.value(tape.conv(tape.constant(x), ctx.branches()[0]));
  ASSERT_EQ(y.length(), 30u);
  for (std::size_t t = 0; t < 30; ++t) {
    const bool tap = t == 11 || t == 15 || t == 19;
    for (std::size_t c = 0; c < 2; ++c) {
      if (tap) {
        EXPECT_NE(y(t, c), 0.0) << t;
      } else {
        EXPECT_EQ(y(t, c), 0.0) << t;
      }
    }
  }
  // Edge: impulse at node 1 reaches only node 5 and itself.
  nn::Tensor<double> e(30, 2);
  e(1, 0) = 1.0;
  const auto z = tape.value(tape.conv(tape.constant(e), ctx.branches()[0]));
  for (std::size_t t = 0; t < 30; ++t) {
    if (t != 1 && t != 5) {
      EXPECT_EQ(z(t, 0), 0.0) << t;
    }
  }
}

TEST(Heads, ShapesAndSharing) {
  SiblingHeads<double> heads(240);
  std::mt19937_64 rng(0);
  heads.init(rng);
  auto a = noise(24, 240, 5);
  auto b = noise(6, 240, 6);
  for (std::size_t c = 0; c < 240; ++c) b(2, c) = a(17, c);
  nn::Tape<double> tape(nn::Mode::kInfer);
  const auto [la, oa] = heads.forward(tape, tape.constant(a));
  const auto [lb, ob] = heads.forward(tape, tape.constant(b));
  EXPECT_EQ(tape.value(la).channels(), 1u);
  EXPECT_EQ(tape.value(oa).channels(), 2u);
  EXPECT_EQ(tape.value(lb).length(), 6u);
  EXPECT_EQ(tape.value(lb)(2, 0), tape.value(la)(17, 0));
  EXPECT_EQ(tape.value(ob)(2, 0), tape.value(oa)(17, 0));
  EXPECT_EQ(tape.value(ob)(2, 1), tape.value(oa)(17, 1));
}

TEST(Heads, JointLossGradientThroughContextAndHeads) {
  GradSuiteOptions o;
  o.trials = 20;
  o.filter = "context_heads_loss";
  const auto r = run_grad_suite(o);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(r[0].passed) << r[0].worst;
  EXPECT_LT(r[0].max_relative_error, 1e-4);
}

}  // namespace
}  // namespace ccrcnn
