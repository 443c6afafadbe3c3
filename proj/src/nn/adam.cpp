#include "ccrcnn/nn/adam.hpp"

#include <cmath>
#include <string>

namespace ccrcnn::nn {

template <typename T>
void adam_step(AdamState<T>& state, ParamList<T>& params) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.trainable() ? p.value.size() : 0, T(0));
      state.second_moment.emplace_back(p.trainable() ? p.value.size() : 0, T(0));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ConfigError("adam: state tracks " +
                      std::to_string(state.first_moment.size()) +
                      " arrays, got " + std::to_string(params.size()));
  }
  state.step_count += 1;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  const T step = static_cast<T>(c.lr / correction1);
  const T inv_c2 = static_cast<T>(1.0 / correction2);
  const T eps = static_cast<T>(c.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable()) continue;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != p.value.size() || p.grad.size() != p.value.size()) {
      throw ConfigError("adam: shape mismatch for parameter " + p.name);
    }
    for (std::size_t j = 0; j < m.size(); ++j) {
      const T g = p.grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      p.value[j] -= step * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
    }
  }
}

template <typename T>
double grad_norm(const ParamList<T>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (T g : p.grad) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(ParamList<T>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      for (T& g : p.grad) g *= scale;
    }
  }
  return norm;
}

template void adam_step(AdamState<float>&, ParamList<float>&);
template void adam_step(AdamState<double>&, ParamList<double>&);
template double clip_grad_norm(ParamList<float>&, double);
template double clip_grad_norm(ParamList<double>&, double);
template double grad_norm(const ParamList<float>&);
template double grad_norm(const ParamList<double>&);

}  // namespace ccrcnn::nn
