#pragma once

// JSON mapping of every configuration record. Readers are strict: unknown
// keys raise ConfigError naming the key; missing keys keep their defaults.

#include <cstddef>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ccrcnn/dataio.hpp"
#include "ccrcnn/model.hpp"
#include "ccrcnn/trainer.hpp"

namespace ccrcnn {

struct TemplateMatchConfig {
  double mu = 8.0;
  bool zero_mean = false;
  double nms_iou = 0.05;
};

struct AblationConfig {
  std::size_t seeds = 3;
  // 0 means "same as train.epochs".
  std::size_t epochs = 0;
};

// Everything a command needs, reproducible from this record and a seed.
struct RunConfig {
  std::string preset = "desk";
  SynthConfig synth;
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;
  TemplateMatchConfig tmatch;
  AblationConfig ablation;

  // Defaults for a named preset ("desk" or "full").
  static RunConfig from_preset(const std::string& preset);
};

nlohmann::ordered_json config_to_json(const SynthConfig& c);
nlohmann::ordered_json config_to_json(const BackboneConfig& c);
nlohmann::ordered_json config_to_json(const HeadConfig& c);
nlohmann::ordered_json config_to_json(const LossParams& c);
nlohmann::ordered_json config_to_json(const ModelConfig& c);
nlohmann::ordered_json config_to_json(const TrainConfig& c);
nlohmann::ordered_json config_to_json(const RunConfig& c);

void config_from_json(const nlohmann::json& j, SynthConfig& c);
void config_from_json(const nlohmann::json& j, BackboneConfig& c);
void config_from_json(const nlohmann::json& j, HeadConfig& c);
void config_from_json(const nlohmann::json& j, LossParams& c);
void config_from_json(const nlohmann::json& j, ModelConfig& c);
void config_from_json(const nlohmann::json& j, TrainConfig& c);
// Honours a "preset" key first, then applies the remaining keys on top.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
ModelConfig load_model_config(const std::filesystem::path& path);

}  // namespace ccrcnn
