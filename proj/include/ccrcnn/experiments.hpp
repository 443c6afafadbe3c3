#pragma once

// Whole-pipeline runs shared by the command line tool and the acceptance
// checks: train-then-test, the template-matching baseline and the ablation
// grid.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ccrcnn/config.hpp"
#include "ccrcnn/dataio.hpp"
#include "ccrcnn/geomeval.hpp"
#include "ccrcnn/tmatch.hpp"
#include "ccrcnn/trainer.hpp"

namespace ccrcnn {

// The dataset named by `manifest`, or the one the config's generator
// produces when the path is empty.
Dataset obtain_dataset(const RunConfig& config, const std::filesystem::path& manifest);

struct TrainOutcome {
  TrainResult train;
  EvalReport test;
  // The same test detections scored with 101-point interpolation, which
  // unlike the default rule charges for missed events.
  EvalReport test_coco;
  std::size_t test_events = 0;
  double train_seconds = 0.0;
};

// Initialises a detector from config.train.seed, fits it and evaluates the
// best-by-validation parameters on the test split. `out_dir` (optional)
// receives the checkpoint, metrics, the echoed config and both test reports.
TrainOutcome train_and_test(const RunConfig& config, const Dataset& dataset,
                            const std::filesystem::path& out_dir = {});

struct TmOutcome {
  std::vector<Detection> detections;  // waveform coordinates
  EvalReport report;
  std::size_t templates = 0;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

// Every training event is a template; the sweep covers the split's region.
TmOutcome run_tm_baseline(const Dataset& dataset, Split split,
                          const TemplateMatchConfig& config, std::size_t threads = 1);

struct ExactCopyOutcome {
  std::size_t embedded = 0;
  std::size_t found = 0;  // embedded copies matched at IoU >= 0.5
  double recall = 0.0;
  double ap50 = 0.0;
};

// Embeds `copies` exact copies of randomly chosen training events into fresh
// background noise and runs the same template bank over it.
ExactCopyOutcome tm_exact_copy_check(const Dataset& dataset,
                                     const TemplateMatchConfig& config,
                                     std::size_t copies, std::uint64_t seed,
                                     std::size_t threads = 1);

struct AblationVariant {
  std::string name;
  bool contextual = true;
  bool multiscale = true;
};

// {contextual, non-contextual} x {multi-scale, single-scale}; single-scale
// keeps the middle detection scale.
std::vector<AblationVariant> ablation_variants();
ModelConfig apply_variant(ModelConfig model, const AblationVariant& variant);

struct AblationRow {
  AblationVariant variant;
  std::vector<double> map;  // one per seed
  std::vector<double> ap50;
  std::vector<double> coco_map;
  double mean_map = 0.0;
  double mean_ap50 = 0.0;
  double mean_coco_map = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

// Trains every variant for config.ablation.seeds seeds (train seeds 0, 1,
// ...) and config.ablation.epochs epochs (0: config.train.epochs).
std::vector<AblationRow> run_ablation(const RunConfig& config, const Dataset& dataset,
                                      const std::vector<AblationVariant>& variants,
                                      const ProgressFn& progress = {});

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace ccrcnn
