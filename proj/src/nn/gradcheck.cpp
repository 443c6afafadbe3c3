#include "ccrcnn/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace ccrcnn::nn {
namespace {

struct Probe {
  double loss = 0.0;
  std::uint64_t signature = 0;
};

Probe evaluate(const Fragment& fragment) {
  Tape<double> tape(Mode::kTrain);
  tape.set_track_signature(true);
  const auto id = fragment(tape);
  const Tensor<double>& out = tape.value(id);
  if (out.size() != 1) {
    throw ConfigError("grad_check: fragment must return a scalar, got " +
                      shape_string(out));
  }
  return {out.raw()[0], tape.signature()};
}

}  // namespace

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_relative_error
     << " checked=" << checked << " skipped_kinks=" << skipped_kinks;
  if (!finite) os << " non-finite values encountered";
  if (!worst_array.empty()) {
    os << " worst=" << worst_array << "[" << worst_index
       << "] analytic=" << worst_analytic << " numeric=" << worst_numeric;
  }
  return os.str();
}

GradCheckReport grad_check(const Fragment& fragment,
                           const ParamList<double>& targets,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  for (const auto& t : targets) {
    std::fill(t.grad.begin(), t.grad.end(), 0.0);
  }

  std::uint64_t base_signature = 0;
  {
    Tape<double> tape(Mode::kTrain);
    tape.set_track_signature(true);
    const auto id = fragment(tape);
    if (tape.value(id).size() != 1) {
      throw ConfigError("grad_check: fragment must return a scalar");
    }
    base_signature = tape.signature();
    if (!std::isfinite(tape.value(id).raw()[0])) report.finite = false;
    tape.backward(id);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(targets.size());
  for (const auto& t : targets) analytic.emplace_back(t.grad.begin(), t.grad.end());

  std::mt19937_64 rng(options.seed);
  const double h = options.step;
  for (std::size_t a = 0; a < targets.size() && report.finite; ++a) {
    const auto& target = targets[a];
    std::vector<std::size_t> coords(target.value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coordinates_per_array != 0 &&
        coords.size() > options.max_coordinates_per_array) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coordinates_per_array);
    }
    for (std::size_t i : coords) {
      const double original = target.value[i];
      target.value[i] = original + h;
      const Probe plus = evaluate(fragment);
      target.value[i] = original - h;
      const Probe minus = evaluate(fragment);
      target.value[i] = original;

      if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss) ||
          !std::isfinite(analytic[a][i])) {
        report.finite = false;
        break;
      }
      if (plus.signature != base_signature || minus.signature != base_signature) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * h);
      const double exact = analytic[a][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric),
                                     options.denominator_floor});
      const double rel = std::abs(exact - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error || report.worst_array.empty()) {
        if (rel >= report.max_relative_error) {
          report.max_relative_error = rel;
          report.worst_array = target.name;
          report.worst_index = i;
          report.worst_analytic = exact;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  report.passed = report.finite && report.checked > 0 &&
                  report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace ccrcnn::nn
