#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "ccrcnn/backbone.hpp"

namespace ccrcnn {
namespace {

using Tape = nn::Tape<float>;

nn::Tensor<float> noise(std::size_t length, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d;
  nn::Tensor<float> t(length, channels);
  for (float& v : t.data()) v = d(rng);
  return t;
}

TEST(DenseBlock, FirstTwoStagesOfTheFullNetwork) {
  EXPECT_EQ(DenseBlock<float>("d1", 24, 12, 6).out_channels(), 96u);
  EXPECT_EQ(DenseBlock<float>("d2", 96, 12, 6).out_channels(), 168u);
}

TEST(DenseBlock, EmptyGrowthKeepsChannels) {
  std::mt19937_64 rng(0);
  for (auto [k, layers] : {std::pair<std::size_t, std::size_t>{0, 6}, {12, 0}}) {
    DenseBlock<float> block("d", 24, k, layers);
    block.init(rng);
    EXPECT_EQ(block.out_channels(), 24u);
    Tape tape(nn::Mode::kInfer);
    const auto y = block.forward(tape, tape.constant(noise(32, 24, 1)));
    EXPECT_EQ(tape.value(y).channels(), 24u);
    EXPECT_EQ(tape.value(y).length(), 32u);
  }
}

TEST(DenseBlock, ClosedFormChannelsAndPreservedLength) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 1 + rng() % 10, k = rng() % 9, layers = rng() % 5;
    const std::size_t len = 1 + rng() % 40;
    DenseBlock<float> block("d", in, k, layers);
    block.init(rng);
    Tape tape(nn::Mode::kTrain);
    const auto y = block.forward(tape, tape.constant(noise(len + 1, in, trial)));
    EXPECT_EQ(tape.value(y).channels(), in + k * layers);
    EXPECT_EQ(tape.value(y).length(), len + 1);
    EXPECT_EQ(block.out_channels(), dense_block_channels(in, k, layers));
  }
}

TEST(DenseBlock, ForwardPassesInputThrough) {
  std::mt19937_64 rng(3);
  DenseBlock<float> block("d", 4, 2, 3);
  block.init(rng);
  const auto x = noise(16, 4, 5);
  Tape tape(nn::Mode::kInfer);
  const auto y = block.forward(tape, tape.constant(x));
  for (std::size_t t = 0; t < 16; ++t)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(tape.value(y)(t, c), x(t, c));
}

TEST(Transition, CompressingStage) {
  std::mt19937_64 rng(1);
  const std::size_t L = 24576;
  TransitionLayer<float> t3("t3", 240, 120);
  t3.init(rng);
  Tape tape(nn::Mode::kInfer);
  const auto y = t3.forward(tape, tape.constant(noise(L / 16, 240, 2)));
  EXPECT_EQ(tape.value(y).channels(), 120u);
  EXPECT_EQ(tape.value(y).length(), L / 32);
}

TEST(Transition, PoolOnlyStage) {
  std::mt19937_64 rng(1);
  TransitionLayer<float> t1("t1", 96, 0);
  t1.init(rng);
  EXPECT_EQ(t1.parameter_count(), 0u);
  const auto x = noise(40, 96, 4);
  Tape tape(nn::Mode::kInfer);
  const auto y = t1.forward(tape, tape.constant(x));
  ASSERT_EQ(tape.value(y).channels(), 96u);
  ASSERT_EQ(tape.value(y).length(), 20u);
  EXPECT_FLOAT_EQ(tape.value(y)(3, 5), 0.5f * (x(6, 5) + x(7, 5)));
}

TEST(Transition, ShortAndOddLengths) {
  std::mt19937_64 rng(1);
  TransitionLayer<float> t("t", 3, 0);
  Tape tape(nn::Mode::kInfer);
  EXPECT_EQ(tape.value(t.forward(tape, tape.constant(noise(2, 3, 1)))).length(), 1u);
  nn::Tensor<float> odd(3, 1, std::vector<float>{2, 4, 6});
  TransitionLayer<float> t1("t", 1, 0);
  const auto y = t1.forward(tape, tape.constant(odd));
  ASSERT_EQ(tape.value(y).length(), 2u);
  EXPECT_FLOAT_EQ(tape.value(y)(1, 0), 3.0f);  // (6 + 0) / 2
}

TEST(Backbone, FullPresetPyramid) {
  const BackboneConfig cfg = BackboneConfig::full();
  cfg.validate();
  Backbone<float> net(cfg);
  std::mt19937_64 rng(0);
  net.init(rng);
  const std::size_t L = 24576;
  Tape tape(nn::Mode::kInfer);
  const auto feats = net.forward(tape, tape.constant(noise(L, 1, 9)));
  ASSERT_EQ(feats.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(tape.value(feats[i]).channels(), 240u);
    EXPECT_EQ(tape.value(feats[i]).length(), L / (16u << i));
    EXPECT_EQ(cfg.scale_stride(i), 16u << i);
  }
  EXPECT_EQ(tape.value(feats[0]).length(), 1536u);
  EXPECT_EQ(tape.value(feats[6]).length(), 24u);
}

TEST(Backbone, FullPresetStageTable) {
  const auto rows = stage_ledger(BackboneConfig::full());
  struct Row { const char* name; std::size_t div, ch; };
  const Row expect[] = {
      {"conv", 2, 24},     {"pool", 4, 24},     {"D1", 4, 96},      {"T1", 8, 96},
      {"D2", 8, 168},      {"T2", 16, 168},     {"D3", 16, 240},    {"T3", 32, 120},
      {"D4", 32, 240},     {"T4", 64, 120},     {"D5", 64, 240},    {"T5", 128, 120},
      {"D6", 128, 240},    {"T6", 256, 120},    {"D7", 256, 240},   {"T7", 512, 120},
      {"D8", 512, 240},    {"T8", 1024, 120},   {"D9", 1024, 240},
  };
  ASSERT_EQ(rows.size(), std::size(expect));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].name, expect[i].name);
    EXPECT_EQ(rows[i].length_divisor, expect[i].div) << rows[i].name;
    EXPECT_EQ(rows[i].channels, expect[i].ch) << rows[i].name;
  }
}

TEST(Backbone, DeskPresetLengths) {
  const BackboneConfig cfg = BackboneConfig::desk();
  Backbone<float> net(cfg);
  std::mt19937_64 rng(0);
  net.init(rng);
  Tape tape(nn::Mode::kTrain);
  const auto feats = net.forward(tape, tape.constant(noise(1024, 1, 3)));
  ASSERT_EQ(feats.size(), 3u);
  const std::size_t lengths[] = {64, 32, 16};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(tape.value(feats[i]).length(), lengths[i]);
    EXPECT_EQ(tape.value(feats[i]).channels(), 64u);
  }
}

TEST(Backbone, RejectsLengthsOffTheLargestStride) {
  Backbone<float> net(BackboneConfig::desk());
  Tape tape(nn::Mode::kInfer);
  try {
    net.forward(tape, tape.constant(noise(1000, 1, 0)));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("64"), std::string::npos) << e.what();
  }
  EXPECT_THROW(net.forward(tape, tape.constant(noise(1024, 2, 0))), ConfigError);
}

TEST(Backbone, ForwardIsBitIdentical) {
  Backbone<float> net(BackboneConfig::desk());
  std::mt19937_64 rng(5);
  net.init(rng);
  const auto x = noise(2048, 1, 11);
  Tape a(nn::Mode::kInfer), b(nn::Mode::kInfer);
  const auto fa = net.forward(a, a.constant(x));
  const auto fb = net.forward(b, b.constant(x));
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_EQ(a.value(fa[i]).data(), b.value(fb[i]).data());
  }
}

// Moving an impulse by exactly one stride moves every feature of that scale
// by exactly one node.
TEST(Backbone, ImpulseShiftsByScaleStride) {
  const BackboneConfig cfg = BackboneConfig::desk();
  Backbone<double> net(cfg);
  std::mt19937_64 rng(8);
  net.init(rng);
  const std::size_t L = 4096;
  auto run = [&](std::size_t pos) {
    nn::Tensor<double> x(L, 1);
    x(pos, 0) = 1.0;
    nn::Tape<double> tape(nn::Mode::kInfer);
    const auto ids = net.forward(tape, tape.constant(x));
    std::vector<nn::Tensor<double>> out;
    for (auto id : ids) out.push_back(tape.value(id));
    return out;
  };
  const std::size_t base = 2048;
  const auto ref = run(base);
  for (std::size_t s = 0; s < cfg.num_scales; ++s) {
    const std::size_t stride = cfg.scale_stride(s);
    EXPECT_EQ(stride, 16u << s);
    const auto moved = run(base + stride);
    const auto& a = ref[s];
    const auto& b = moved[s];
    std::size_t support = 0;
    for (std::size_t t = 0; t + 1 < a.length(); ++t) {
      for (std::size_t c = 0; c < a.channels(); ++c) {
        EXPECT_NEAR(b(t + 1, c), a(t, c), 1e-12) << "scale " << s << " node " << t;
        if (a(t, c) != 0.0) ++support;
      }
    }
    EXPECT_GT(support, 0u);
    // Support is local: nodes far from the impulse are untouched.
    for (std::size_t c = 0; c < a.channels(); ++c) EXPECT_EQ(a(0, c), 0.0);
  }
}

// Independent count from the layer recipe: BN has 2c trainables, a conv
// k*in*out + out.
std::size_t expected_backbone_params(const BackboneConfig& c) {
  std::size_t n = c.stem_kernel * c.stem_channels + c.stem_channels + 2 * c.stem_channels;
  std::size_t ch = c.stem_channels;
  for (std::size_t b = 0; b < c.num_blocks(); ++b) {
    for (std::size_t l = 0; l < c.layers_per_block; ++l) {
      const std::size_t in = ch + l * c.growth_rates[b];
      n += 2 * in + 3 * in * c.growth_rates[b] + c.growth_rates[b];
    }
    ch += c.layers_per_block * c.growth_rates[b];
    if (b + 1 < c.num_blocks() && c.transition_compress[b] != 0) {
      const std::size_t out = c.transition_compress[b];
      n += 2 * ch + ch * out + out;
      ch = out;
    }
  }
  return n;
}

TEST(Backbone, ParameterCountMatchesRecipe) {
  for (const auto& cfg : {BackboneConfig::full(), BackboneConfig::desk()}) {
    Backbone<float> net(cfg);
    EXPECT_EQ(net.parameter_count(), expected_backbone_params(cfg));
    nn::ParamCollector<float> pc;
    net.collect(pc);
    EXPECT_EQ(nn::count_values(pc.trainable), net.parameter_count());
  }
}

TEST(BackboneConfig, ValidateCatchesInconsistency) {
  BackboneConfig c = BackboneConfig::full();
  c.proposal_feature_dim = 200;
  EXPECT_THROW(c.validate(), ConfigError);
  c = BackboneConfig::full();
  c.transition_compress.pop_back();
  EXPECT_THROW(c.validate(), ConfigError);
  c = BackboneConfig::desk();
  c.num_scales = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(BackboneConfig::desk().validate());
}

}  // namespace
}  // namespace ccrcnn
