// Command line front end: synth, train, detect, eval, tm-baseline,
// gradcheck and ablate.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccrcnn/config.hpp"
#include "ccrcnn/errors.hpp"
#include "ccrcnn/experiments.hpp"
#include "ccrcnn/gradsuite.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using namespace ccrcnn;

namespace {

// Flags shared by every command. Optional ones only override the config
// when given.
struct Common {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

struct ModelFlags {
  std::optional<double> alpha;
  std::optional<double> lambda;
  bool no_context = false;
  std::string scales;
  std::optional<std::size_t> epochs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run configuration");
  cmd->add_option("--preset", c.preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--seed", c.seed, "seed");
  cmd->add_option("--threads", c.threads, "worker threads");
  cmd->add_option("--out", c.out, "output directory");
}

void add_model_flags(CLI::App* cmd, ModelFlags& m) {
  cmd->add_option("--alpha", m.alpha, "label-dependent loss weight of positives");
  cmd->add_option("--lambda", m.lambda, "regression loss weight");
  cmd->add_flag("--no-context", m.no_context, "drop the atrous contextual block");
  cmd->add_option("--scales", m.scales, "active detection scales, e.g. 1..1 or 0..2");
  cmd->add_option("--epochs", m.epochs, "training epochs");
}

RunConfig load_config(const Common& c) {
  nlohmann::json j = nlohmann::json::object();
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw ConfigError("cannot open config " + c.config_path);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(c.config_path + ": " + e.what());
    }
  }
  if (!c.preset.empty()) j["preset"] = c.preset;
  RunConfig rc = run_config_from_json(j);
  if (c.threads) rc.train.threads = std::max<std::size_t>(1, *c.threads);
  return rc;
}

void apply_model_flags(RunConfig& rc, const ModelFlags& m) {
  if (m.alpha) rc.model.loss.alpha = *m.alpha;
  if (m.lambda) rc.model.loss.lambda = *m.lambda;
  if (m.no_context) rc.model.head.contextual = false;
  if (m.epochs) rc.train.epochs = *m.epochs;
  if (!m.scales.empty()) {
    const auto dots = m.scales.find("..");
    try {
      const std::string a = m.scales.substr(0, dots);
      const std::string b = dots == std::string::npos ? a : m.scales.substr(dots + 2);
      const long first = std::stol(a), last = std::stol(b);
      if (first < 0 || last < first) throw std::invalid_argument("order");
      rc.model.head.first_scale = static_cast<std::size_t>(first);
      rc.model.head.last_scale = static_cast<int>(last);
    } catch (const std::logic_error&) {
      throw ConfigError("--scales expects i..j with 0 <= i <= j, got '" + m.scales + "'");
    }
  }
  rc.model.validate();
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out DIR is required");
  fs::create_directories(c.out);
  return c.out;
}

void echo_config(const fs::path& dir, const RunConfig& rc) {
  std::ofstream(dir / "config.json") << config_to_json(rc).dump(2) << '\n';
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

void print_report(const char* what, const EvalReport& r) {
  std::printf("%s: AP@[.50,.95] %.4f  AP@.50 %.4f  AP@.75 %.4f\n", what, r.map,
              r.ap_per_threshold[0], r.ap_per_threshold[5]);
}

std::vector<Detection> detections_in(std::span<const Detection> dets, Interval region) {
  std::vector<Detection> out;
  for (const auto& d : dets) {
    const double c = d.interval.center();
    if (c >= static_cast<double>(region.begin) && c < static_cast<double>(region.end)) {
      out.push_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_synth(const Common& c) {
  RunConfig rc = load_config(c);
  if (c.seed) rc.synth.seed = *c.seed;
  const fs::path out = require_out(c);
  const Dataset d = generate_synthetic(rc.synth);
  save_dataset(out, d);
  echo_config(out, rc);
  std::printf("wrote %zu samples, %zu events to %s\n", d.waveform.size(), d.events.size(),
              out.string().c_str());
  return 0;
}

int cmd_train(const Common& c, const ModelFlags& m, const std::string& data, bool plot) {
  RunConfig rc = load_config(c);
  apply_model_flags(rc, m);
  if (c.seed) rc.train.seed = *c.seed;
  rc.train.verbose = true;
  const fs::path out = require_out(c);
  const Dataset d = obtain_dataset(rc, data);
  const TrainOutcome o = train_and_test(rc, d, out);
  std::printf("trained %zu epochs in %.1f s; best epoch %zu (val mAP %.4f)\n",
              o.train.history.size(), o.train_seconds, o.train.best_epoch,
              o.train.best_val_map);
  print_report("test", o.test);
  print_report("test, 101-point", o.test_coco);
  if (plot) {
    svg::Series loss{"train loss", {}, {}, "#c44e52"}, val{"val mAP", {}, {}, "#4c72b0"};
    for (const auto& e : o.train.history) {
      loss.x.push_back(double(e.epoch));
      loss.y.push_back(e.loss);
      val.x.push_back(double(e.epoch));
      val.y.push_back(e.val_map);
    }
    write_file(out / "metrics.svg", svg::line_chart("training", "epoch", {loss, val}));
  }
  return 0;
}

int cmd_detect(const Common& c, const ModelFlags& m, const std::string& data,
               const std::string& checkpoint, const std::string& split_name_arg, bool plot) {
  RunConfig rc = load_config(c);
  apply_model_flags(rc, m);
  const fs::path out = require_out(c);
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const Dataset d = obtain_dataset(rc, data);
  Detector<float> model(rc.model);
  auto params = model.parameters();
  load_checkpoint(checkpoint, params);
  const Split split = parse_split(split_name_arg);
  const SplitView view = split_view(d, split);
  const auto dets = detect_region(model, d.waveform, view.region, rc.train.threads);
  save_detections(out / "detections.csv", dets);
  echo_config(out, rc);
  std::printf("%zu detections on the %s split\n", dets.size(), split_name(split));
  if (plot) {
    const std::int64_t len = std::min<std::int64_t>(view.region.width(), 100'000);
    write_file(out / "detections.svg",
               svg::detection_plot(std::string("detections, ") + split_name(split) + " split",
                                   std::span(d.waveform).subspan(
                                       static_cast<std::size_t>(view.region.begin),
                                       static_cast<std::size_t>(len)),
                                   view.region.begin, view.events, dets));
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& data, const std::string& detections,
             const std::string& split_name_arg, bool coco) {
  RunConfig rc = load_config(c);
  const fs::path out = require_out(c);
  if (detections.empty()) throw ConfigError("--detections is required");
  const Dataset d = obtain_dataset(rc, data);
  const SplitView view = split_view(d, parse_split(split_name_arg));
  const auto dets = detections_in(load_detections(detections), view.region);
  const EvalReport r = ap_range(dets, view.events,
                                coco ? ApInterpolation::kCoco101 : ApInterpolation::kUniqueRecall);
  write_file(out / "report.json", r.to_json() + "\n");
  echo_config(out, rc);
  print_report(split_name_arg.c_str(), r);
  return 0;
}

int cmd_tm(const Common& c, const std::string& data, std::optional<double> mu,
           bool zero_mean, const std::string& split_name_arg, bool plot) {
  RunConfig rc = load_config(c);
  if (mu) rc.tmatch.mu = *mu;
  if (zero_mean) rc.tmatch.zero_mean = true;
  const fs::path out = require_out(c);
  const Dataset d = obtain_dataset(rc, data);
  const Split split = parse_split(split_name_arg);
  const TmOutcome o = run_tm_baseline(d, split, rc.tmatch, rc.train.threads);
  for (const auto& w : o.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  save_detections(out / "detections.csv", o.detections);
  write_file(out / "report.json", o.report.to_json() + "\n");
  echo_config(out, rc);
  std::printf("%zu templates, %zu detections, %.1f s\n", o.templates, o.detections.size(),
              o.seconds);
  print_report(split_name_arg.c_str(), o.report);
  if (plot) {
    const SplitView view = split_view(d, split);
    const std::int64_t len = std::min<std::int64_t>(view.region.width(), 100'000);
    write_file(out / "detections.svg",
               svg::detection_plot("template matching",
                                   std::span(d.waveform).subspan(
                                       static_cast<std::size_t>(view.region.begin),
                                       static_cast<std::size_t>(len)),
                                   view.region.begin, view.events, o.detections));
  }
  return 0;
}

int cmd_gradcheck(const Common& c, std::size_t trials, const std::string& filter) {
  GradSuiteOptions opt;
  opt.trials = trials;
  opt.filter = filter;
  if (c.seed) opt.seed = *c.seed;
  const auto entries = run_grad_suite(opt);
  if (entries.empty()) throw ConfigError("no fragment matches '" + filter + "'");
  bool ok = true;
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  std::printf("%-22s %7s %9s %7s %12s  %s\n", "fragment", "trials", "checked", "kinks",
              "max rel err", "result");
  for (const auto& e : entries) {
    std::printf("%-22s %7zu %9zu %7zu %12.3e  %s\n", e.name.c_str(), e.trials, e.checked,
                e.skipped_kinks, e.max_relative_error, e.passed ? "ok" : "FAIL");
    if (!e.passed) std::printf("  worst: %s\n", e.worst.c_str());
    ok = ok && e.passed;
    j.push_back({{"name", e.name},
                 {"trials", e.trials},
                 {"checked", e.checked},
                 {"skipped_kinks", e.skipped_kinks},
                 {"max_relative_error", e.max_relative_error},
                 {"worst", e.worst},
                 {"passed", e.passed}});
  }
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_file(fs::path(c.out) / "gradcheck.json", j.dump(2) + "\n");
  }
  if (!ok) throw NumericalError("gradient check failed (tolerance " + std::to_string(opt.tolerance) + ")");
  return 0;
}

int cmd_ablate(const Common& c, const ModelFlags& m, const std::string& data,
               std::optional<std::size_t> seeds, bool plot) {
  RunConfig rc = load_config(c);
  apply_model_flags(rc, m);
  if (seeds) rc.ablation.seeds = *seeds;
  if (m.epochs) rc.ablation.epochs = *m.epochs;
  const fs::path out = require_out(c);
  echo_config(out, rc);
  const Dataset d = obtain_dataset(rc, data);
  const auto rows = run_ablation(rc, d, ablation_variants(), [](const std::string& msg) {
    std::fprintf(stderr, "%s\n", msg.c_str());
  });
  const std::string table = ablation_table(rows);
  write_file(out / "ablation.md", table);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"variant", r.variant.name},
                 {"contextual", r.variant.contextual},
                 {"multiscale", r.variant.multiscale},
                 {"map", r.map},
                 {"ap50", r.ap50},
                 {"mean_map", r.mean_map},
                 {"mean_ap50", r.mean_ap50},
                 {"coco_map", r.coco_map},
                 {"mean_coco_map", r.mean_coco_map}});
  }
  write_file(out / "ablation.json", j.dump(2) + "\n");
  std::printf("%s", table.c_str());
  if (plot) {
    std::vector<std::string> labels;
    std::vector<double> values;
    for (const auto& r : rows) {
      labels.push_back(r.variant.name);
      values.push_back(r.mean_map);
    }
    write_file(out / "ablation.svg", svg::bar_chart("mean test AP@[.50,.95]", labels, values));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascaded contextual region detector for 1D event detection"};
  app.require_subcommand(1);

  Common common;
  ModelFlags model;
  std::string data, checkpoint, detections, split = "test", filter;
  std::optional<double> mu;
  std::optional<std::size_t> seeds;
  std::size_t trials = 100;
  bool plot = false, coco = false, zero_mean = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, common);

  auto* train = app.add_subcommand("train", "train and test a detector");
  add_common(train, common);
  add_model_flags(train, model);
  train->add_option("--data", data, "dataset manifest (default: generate from config)");
  train->add_flag("--plot", plot, "write metrics.svg");

  auto* detect = app.add_subcommand("detect", "run a trained detector over a split");
  add_common(detect, common);
  add_model_flags(detect, model);
  detect->add_option("--data", data, "dataset manifest");
  detect->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  detect->add_option("--split", split, "train, val or test");
  detect->add_flag("--plot", plot, "write detections.svg");

  auto* eval = app.add_subcommand("eval", "score a detections CSV against a split");
  add_common(eval, common);
  eval->add_option("--data", data, "dataset manifest");
  eval->add_option("--detections", detections, "detections CSV")->required();
  eval->add_option("--split", split, "train, val or test");
  eval->add_flag("--coco", coco, "101-point interpolation instead of the unique-recall rule");

  auto* tm = app.add_subcommand("tm-baseline", "template-matching baseline");
  add_common(tm, common);
  tm->add_option("--data", data, "dataset manifest");
  tm->add_option("--mu", mu, "threshold multiple of the CC trace MAD");
  tm->add_flag("--zero-mean", zero_mean, "zero-mean windows and templates");
  tm->add_option("--split", split, "train, val or test");
  tm->add_flag("--plot", plot, "write detections.svg");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(grad, common);
  grad->add_option("--trials", trials, "trials per fragment");
  grad->add_option("--filter", filter, "only fragments whose name contains this");

  auto* ablate = app.add_subcommand("ablate", "contextual and multi-scale ablation grid");
  add_common(ablate, common);
  add_model_flags(ablate, model);
  ablate->add_option("--data", data, "dataset manifest");
  ablate->add_option("--seeds", seeds, "seeds per variant");
  ablate->add_flag("--plot", plot, "write ablation.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (synth->parsed()) return cmd_synth(common);
    if (train->parsed()) return cmd_train(common, model, data, plot);
    if (detect->parsed()) return cmd_detect(common, model, data, checkpoint, split, plot);
    if (eval->parsed()) return cmd_eval(common, data, detections, split, coco);
    if (tm->parsed()) return cmd_tm(common, data, mu, zero_mean, split, plot);
    if (grad->parsed()) return cmd_gradcheck(common, trials, filter);
    if (ablate->parsed()) return cmd_ablate(common, model, data, seeds, plot);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::kUsage);
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}
