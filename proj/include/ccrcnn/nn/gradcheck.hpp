#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "ccrcnn/nn/tape.hpp"

namespace ccrcnn::nn {

struct GradCheckOptions {
  double step = 1e-5;        // central-difference half width
  double tolerance = 1e-4;   // pass threshold on the max relative error
  double denominator_floor = 1e-6;
  // 0 checks every coordinate; otherwise at most this many per array,
  // sampled with `seed`.
  std::size_t max_coordinates_per_array = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_array;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  bool finite = true;
  bool passed = false;

  std::string summary() const;
};

// Builds the graph of a scalar-valued network fragment on the given tape and
// returns the id of the (1 x 1) loss node.
using Fragment = std::function<Tape<double>::Id(Tape<double>&)>;

// Compares the reverse-mode gradient of `fragment` with respect to every
// array in `targets` against central differences. Probes that change the
// tape's activation signature (a ReLU or max-pool switching branch) are
// skipped and counted. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const Fragment& fragment,
                           const ParamList<double>& targets,
                           const GradCheckOptions& options = {});

}  // namespace ccrcnn::nn
