#pragma once

#include <cstddef>
#include <vector>

#include "ccrcnn/nn/tensor.hpp"

namespace ccrcnn::nn {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Optimizer state: hyperparameters, step counter and one pair of moment
// buffers per parameter array, in the order of the ParamList it steps.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::size_t step_count = 0;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

// One bias-corrected Adam update of every trainable array in `params`
// (buffers are skipped). Moment buffers are created on the first call and
// validated against the parameter shapes afterwards.
template <typename T>
void adam_step(AdamState<T>& state, ParamList<T>& params);

// Scales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamList<T>& params, double max_norm);

template <typename T>
double grad_norm(const ParamList<T>& params);

}  // namespace ccrcnn::nn
