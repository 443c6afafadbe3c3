#pragma once

// Randomised gradient checks over every layer type and the detection head
// stack, shared by the `gradcheck` command and the tests.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccrcnn/nn/gradcheck.hpp"

namespace ccrcnn {

// Reduces x to sum_i w_i x_i, a (1 x 1) node. Used to turn any layer output
// into a scalar with a non-degenerate gradient.
nn::Tape<double>::Id weighted_sum(nn::Tape<double>& tape, nn::Tape<double>::Id x,
                                  std::vector<double> weights);

struct GradSuiteOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double step = 1e-5;
  // Coordinates probed per array and trial for the larger fragments.
  std::size_t sample_coordinates = 16;
  // Restricts the run to fragments whose name contains this string.
  std::string filter;
};

struct GradSuiteEntry {
  std::string name;
  std::size_t trials = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_relative_error = 0.0;
  std::string worst;  // summary of the worst trial
  bool passed = false;
};

std::vector<std::string> grad_suite_fragments();
std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& options);

}  // namespace ccrcnn
