#include "ccrcnn/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>

#include "ccrcnn/backbone.hpp"
#include "ccrcnn/dethead.hpp"

namespace ccrcnn {

using Tape = nn::Tape<double>;
using Id = Tape::Id;

Id weighted_sum(Tape& tape, Id x, std::vector<double> weights) {
  const nn::Tensor<double>& v = tape.value(x);
  if (weights.size() != v.size()) {
    throw ConfigError("weighted_sum: " + std::to_string(weights.size()) +
                      " weights for " + nn::shape_string(v));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += weights[i] * v.raw()[i];
  return tape.custom(nn::Tensor<double>(1, 1, s), {x},
                     [x, w = std::move(weights)](Tape& t, Id self) {
                       const double g = t.grad(self).raw()[0];
                       nn::Tensor<double>& gx = t.grad(x);
                       for (std::size_t i = 0; i < w.size(); ++i) gx.raw()[i] += g * w[i];
                     });
}

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<double> normals(Rng& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// A differentiable input array owned by the check.
struct Input {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<double> value;
  std::vector<double> grad;

  Input(std::size_t l, std::size_t c, std::vector<double> v)
      : length(l), channels(c), value(std::move(v)), grad(value.size(), 0.0) {}

  Id feed(Tape& tape) {
    return tape.input(nn::Tensor<double>(length, channels, value), grad);
  }
  nn::ParamRef<double> ref(const std::string& name) {
    return {name, {length, channels}, value, grad};
  }
};

// Everything one trial needs; layers and inputs stay alive for the check.
struct Case {
  std::vector<std::unique_ptr<Input>> inputs;
  nn::ParamCollector<double> params;
  std::vector<std::shared_ptr<void>> keep;
  nn::Fragment fragment;
  bool sampled = false;

  Input& add_input(std::size_t l, std::size_t c, std::vector<double> v) {
    inputs.push_back(std::make_unique<Input>(l, c, std::move(v)));
    return *inputs.back();
  }
  template <typename M, typename... A>
  M& make(A&&... args) {
    auto p = std::make_shared<M>(std::forward<A>(args)...);
    keep.push_back(p);
    return *p;
  }
  nn::ParamList<double> targets() {
    nn::ParamList<double> t = params.trainable;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      t.push_back(inputs[i]->ref("input" + std::to_string(i)));
    }
    return t;
  }
};

// Values bounded away from zero so ReLU kinks are rare.
std::vector<double> nudged(Rng& rng, std::size_t n) {
  std::vector<double> v = normals(rng, n);
  for (double& x : v) {
    if (std::abs(x) < 0.05) x = x < 0 ? -0.05 - std::abs(x) : 0.05 + x;
  }
  return v;
}

void conv_case(Case& c, Rng& rng) {
  const std::size_t k = pick(rng, 1, 5), in = pick(rng, 1, 3), out = pick(rng, 1, 3);
  const std::size_t stride = pick(rng, 1, 2), dil = pick(rng, 1, 3), pad = pick(rng, 0, 2);
  const std::size_t span = dil * (k - 1) + 1;
  const std::size_t len = std::max<std::size_t>(span, 2 * pad + 1) + pick(rng, 0, 6);
  auto& conv = c.make<nn::Conv1d<double>>("conv", k, in, out, stride, dil, pad);
  conv.init_fan_in(rng);
  for (double& b : conv.params().bias) b = normals(rng, 1)[0];
  conv.collect(c.params);
  Input& x = c.add_input(len, in, normals(rng, len * in));
  const std::size_t n_out = nn::conv1d_output_length(len, k, stride, dil, pad) * out;
  c.fragment = [&conv, &x, w = normals(rng, n_out)](Tape& t) {
    return weighted_sum(t, t.conv(x.feed(t), conv), w);
  };
}

void batchnorm_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 3, 9), ch = pick(rng, 1, 3);
  auto& bn = c.make<nn::BatchNorm1d<double>>("bn", ch);
  bn.params().scale = normals(rng, ch);
  bn.params().shift = normals(rng, ch);
  bn.collect(c.params);
  Input& x = c.add_input(len, ch, normals(rng, len * ch));
  c.fragment = [&bn, &x, w = normals(rng, len * ch)](Tape& t) {
    return weighted_sum(t, t.batchnorm(x.feed(t), bn), w);
  };
}

void relu_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 2, 10), ch = pick(rng, 1, 3);
  Input& x = c.add_input(len, ch, nudged(rng, len * ch));
  c.fragment = [&x, w = normals(rng, len * ch)](Tape& t) {
    return weighted_sum(t, t.relu(x.feed(t)), w);
  };
}

void sigmoid_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 2, 10), ch = pick(rng, 1, 3);
  Input& x = c.add_input(len, ch, normals(rng, len * ch, 2.0));
  c.fragment = [&x, w = normals(rng, len * ch)](Tape& t) {
    return weighted_sum(t, t.sigmoid(x.feed(t)), w);
  };
}

void maxpool_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 3, 12), ch = pick(rng, 1, 3);
  const nn::PoolGeometry g{3, 2, 1, 1};
  Input& x = c.add_input(len, ch, normals(rng, len * ch));
  const std::size_t n = g.output_length(len) * ch;
  c.fragment = [&x, g, w = normals(rng, n)](Tape& t) {
    return weighted_sum(t, t.maxpool(x.feed(t), g), w);
  };
}

void avgpool_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 2, 12), ch = pick(rng, 1, 3);
  const nn::PoolGeometry g{2, 2, 0, len % 2};
  Input& x = c.add_input(len, ch, normals(rng, len * ch));
  const std::size_t n = g.output_length(len) * ch;
  c.fragment = [&x, g, w = normals(rng, n)](Tape& t) {
    return weighted_sum(t, t.avgpool(x.feed(t), g), w);
  };
}

// concat along channels, then along time, then a slice.
void concat_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 2, 8), ca = pick(rng, 1, 3), cb = pick(rng, 1, 3);
  Input& a = c.add_input(len, ca, normals(rng, len * ca));
  Input& b = c.add_input(len, cb, normals(rng, len * cb));
  Input& d = c.add_input(len + 1, ca + cb, normals(rng, (len + 1) * (ca + cb)));
  const std::size_t begin = pick(rng, 0, len);
  const std::size_t n = (2 * len + 1 - begin) * (ca + cb);
  c.fragment = [&a, &b, &d, begin, len, w = normals(rng, n)](Tape& t) {
    const Id ab[2] = {a.feed(t), b.feed(t)};
    const Id joined = t.concat(ab);
    const Id stack[2] = {joined, d.feed(t)};
    const Id tall = t.concat_time(stack);
    return weighted_sum(t, t.slice_time(tall, begin, 2 * len + 1 - begin), w);
  };
}

void stack_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 4, 10), in = pick(rng, 1, 3), mid = pick(rng, 2, 4);
  auto& conv = c.make<nn::Conv1d<double>>("conv", 3, in, mid, 1, 1, 1);
  auto& bn = c.make<nn::BatchNorm1d<double>>("bn", mid);
  conv.init_fan_in(rng);
  bn.params().scale = normals(rng, mid);
  bn.params().shift = normals(rng, mid, 0.5);
  conv.collect(c.params);
  bn.collect(c.params);
  Input& x = c.add_input(len, in, normals(rng, len * in));
  c.fragment = [&conv, &bn, &x, w = normals(rng, len * mid)](Tape& t) {
    return weighted_sum(t, t.relu(t.batchnorm(t.conv(x.feed(t), conv), bn)), w);
  };
}

void dense_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 4, 10), in = pick(rng, 1, 3);
  const std::size_t k = pick(rng, 1, 3), layers = pick(rng, 1, 3);
  auto& block = c.make<DenseBlock<double>>("dense", in, k, layers);
  block.init(rng);
  block.collect(c.params);
  Input& x = c.add_input(len, in, normals(rng, len * in));
  c.fragment = [&block, &x, w = normals(rng, len * block.out_channels())](Tape& t) {
    return weighted_sum(t, block.forward(t, x.feed(t)), w);
  };
  c.sampled = true;
}

void transition_case(Case& c, Rng& rng) {
  const std::size_t len = pick(rng, 3, 11), in = pick(rng, 2, 6);
  const std::size_t compress = pick(rng, 0, 1) ? in / 2 : 0;
  auto& tr = c.make<TransitionLayer<double>>("transition", in, compress);
  tr.init(rng);
  tr.collect(c.params);
  Input& x = c.add_input(len, in, normals(rng, len * in));
  const std::size_t n = (len + 1) / 2 * tr.out_channels();
  c.fragment = [&tr, &x, w = normals(rng, n)](Tape& t) {
    return weighted_sum(t, tr.forward(t, x.feed(t)), w);
  };
}

// Desk-width contextual block and sibling heads over three scales, reduced
// by the joint detection loss on a random proposal sample.
void head_stack_case(Case& c, Rng& rng) {
  const std::size_t p = 64;
  const std::size_t lengths[3] = {16, 8, 4};
  auto& ctx = c.make<ContextualBlock<double>>(p, std::vector<std::size_t>{4, 8, 12});
  auto& heads = c.make<SiblingHeads<double>>(p);
  ctx.init(rng);
  heads.init(rng, 0.1);
  ctx.collect(c.params);
  heads.collect(c.params);
  std::vector<Input*> xs;
  for (std::size_t len : lengths) xs.push_back(&c.add_input(len, p, normals(rng, len * p)));

  const std::size_t rows = lengths[0] + lengths[1] + lengths[2];
  std::vector<std::size_t> chosen(rows);
  for (std::size_t i = 0; i < rows; ++i) chosen[i] = i;
  std::shuffle(chosen.begin(), chosen.end(), rng);
  chosen.resize(12);
  std::vector<SampledProposal> props;
  std::uniform_real_distribution<double> off(-1.5, 1.5);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    props.push_back({0, chosen[i], i % 2 == 0 ? 1 : -1, {off(rng), off(rng)}});
  }
  LossParams lp;
  lp.alpha = std::uniform_real_distribution<double>(0.3, 0.7)(rng);
  lp.lambda = std::uniform_real_distribution<double>(0.5, 2.0)(rng);

  c.fragment = [&ctx, &heads, xs, props, lp](Tape& t) {
    std::vector<Id> ids;
    for (Input* x : xs) ids.push_back(x->feed(t));
    const Id stacked = ctx.forward_stacked(t, ids);
    const auto [logits, offsets] = heads.forward(t, stacked);
    const nn::Tensor<double>& lv = t.value(logits);
    const nn::Tensor<double>& ov = t.value(offsets);
    std::vector<ProposalPrediction> preds;
    for (const auto& s : props) {
      preds.push_back({lv(s.node_index, 0), ov(s.node_index, 0), ov(s.node_index, 1)});
    }
    const JointLoss loss = joint_loss(props, preds, lp);
    return t.custom(nn::Tensor<double>(1, 1, loss.value), {logits, offsets},
                    [props, grads = loss.grads, logits, offsets](Tape& tt, Id self) {
                      const double g = tt.grad(self).raw()[0];
                      nn::Tensor<double>& gl = tt.grad(logits);
                      nn::Tensor<double>& go = tt.grad(offsets);
                      for (std::size_t i = 0; i < props.size(); ++i) {
                        const std::size_t r = props[i].node_index;
                        gl(r, 0) += g * grads[i].d_cls;
                        go(r, 0) += g * grads[i].d_x;
                        go(r, 1) += g * grads[i].d_w;
                      }
                    });
  };
  c.sampled = true;
}

struct Fragment {
  const char* name;
  void (*build)(Case&, Rng&);
};

constexpr Fragment kFragments[] = {
    {"conv1d", conv_case},         {"batchnorm", batchnorm_case},
    {"relu", relu_case},           {"sigmoid", sigmoid_case},
    {"maxpool", maxpool_case},     {"avgpool", avgpool_case},
    {"concat", concat_case},       {"conv_bn_relu", stack_case},
    {"dense_block", dense_case},   {"transition", transition_case},
    {"context_heads_loss", head_stack_case},
};

}  // namespace

std::vector<std::string> grad_suite_fragments() {
  std::vector<std::string> out;
  for (const auto& f : kFragments) out.emplace_back(f.name);
  return out;
}

std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& options) {
  std::vector<GradSuiteEntry> out;
  for (std::size_t fi = 0; fi < std::size(kFragments); ++fi) {
    const Fragment& f = kFragments[fi];
    if (!options.filter.empty() &&
        std::string(f.name).find(options.filter) == std::string::npos) {
      continue;
    }
    GradSuiteEntry e;
    e.name = f.name;
    e.passed = true;
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
      const std::uint64_t seed = options.seed * 1000003u + fi * 7919u + trial;
      Rng rng(seed);
      Case c;
      f.build(c, rng);
      nn::GradCheckOptions go;
      go.step = options.step;
      go.tolerance = options.tolerance;
      go.seed = seed;
      if (c.sampled) go.max_coordinates_per_array = options.sample_coordinates;
      const nn::GradCheckReport r = nn::grad_check(c.fragment, c.targets(), go);
      ++e.trials;
      e.checked += r.checked;
      e.skipped_kinks += r.skipped_kinks;
      if (r.max_relative_error >= e.max_relative_error || e.worst.empty()) {
        e.max_relative_error = std::max(e.max_relative_error, r.max_relative_error);
        e.worst = "trial " + std::to_string(trial) + ": " + r.summary();
      }
      if (!r.passed) {
        e.passed = false;
        if (!r.finite) e.max_relative_error = INFINITY;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ccrcnn
