#include "ccrcnn/config.hpp"

#include <fstream>
#include <set>

#include "ccrcnn/errors.hpp"

namespace ccrcnn {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Reads keys out of one JSON object and complains about the leftovers.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) {
        throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  template <typename T>
  void nested(const char* key, T& out) {
    used_.insert(key);
    if (j_.contains(key)) config_from_json(j_.at(key), out);
  }
  void mark(const char* key) { used_.insert(key); }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

}  // namespace

ordered_json config_to_json(const SynthConfig& c) {
  ordered_json j;
  j["total_length"] = c.total_length;
  j["event_count"] = c.event_count;
  j["length_median"] = c.length_median;
  j["length_sigma"] = c.length_sigma;
  j["length_min"] = c.length_min;
  j["length_max"] = c.length_max;
  j["noise_sigma"] = c.noise_sigma;
  j["min_gap"] = c.min_gap;
  j["amplitude_min"] = c.amplitude_min;
  j["amplitude_max"] = c.amplitude_max;
  j["frequency_min"] = c.frequency_min;
  j["frequency_max"] = c.frequency_max;
  j["rise_fraction"] = c.rise_fraction;
  j["support_level"] = c.support_level;
  j["train_fraction"] = c.train_fraction;
  j["val_fraction"] = c.val_fraction;
  j["seed"] = c.seed;
  return j;
}

void config_from_json(const json& j, SynthConfig& c) {
  Fields f(j, "synth");
  f.get("total_length", c.total_length);
  f.get("event_count", c.event_count);
  f.get("length_median", c.length_median);
  f.get("length_sigma", c.length_sigma);
  f.get("length_min", c.length_min);
  f.get("length_max", c.length_max);
  f.get("noise_sigma", c.noise_sigma);
  f.get("min_gap", c.min_gap);
  f.get("amplitude_min", c.amplitude_min);
  f.get("amplitude_max", c.amplitude_max);
  f.get("frequency_min", c.frequency_min);
  f.get("frequency_max", c.frequency_max);
  f.get("rise_fraction", c.rise_fraction);
  f.get("support_level", c.support_level);
  f.get("train_fraction", c.train_fraction);
  f.get("val_fraction", c.val_fraction);
  f.get("seed", c.seed);
}

ordered_json config_to_json(const BackboneConfig& c) {
  ordered_json j;
  j["stem_channels"] = c.stem_channels;
  j["stem_kernel"] = c.stem_kernel;
  j["growth_rates"] = c.growth_rates;
  j["layers_per_block"] = c.layers_per_block;
  j["num_scales"] = c.num_scales;
  j["transition_compress"] = c.transition_compress;
  j["proposal_feature_dim"] = c.proposal_feature_dim;
  j["bn_momentum"] = c.bn_momentum;
  j["bn_epsilon"] = c.bn_epsilon;
  return j;
}

void config_from_json(const json& j, BackboneConfig& c) {
  Fields f(j, "backbone");
  f.get("stem_channels", c.stem_channels);
  f.get("stem_kernel", c.stem_kernel);
  f.get("growth_rates", c.growth_rates);
  f.get("layers_per_block", c.layers_per_block);
  f.get("num_scales", c.num_scales);
  f.get("transition_compress", c.transition_compress);
  f.get("proposal_feature_dim", c.proposal_feature_dim);
  f.get("bn_momentum", c.bn_momentum);
  f.get("bn_epsilon", c.bn_epsilon);
}

ordered_json config_to_json(const HeadConfig& c) {
  ordered_json j;
  j["anchor_sizes"] = c.anchor_sizes;
  j["dilations"] = c.dilations;
  j["contextual"] = c.contextual;
  j["positive_iou"] = c.positive_iou;
  j["negative_iou"] = c.negative_iou;
  j["score_threshold"] = c.score_threshold;
  j["nms_iou"] = c.nms_iou;
  j["max_dw"] = c.max_dw;
  j["logit_clamp"] = c.logit_clamp;
  j["proposal_quotas"] = c.proposal_quotas;
  j["first_scale"] = c.first_scale;
  j["last_scale"] = c.last_scale;
  return j;
}

void config_from_json(const json& j, HeadConfig& c) {
  Fields f(j, "head");
  f.get("anchor_sizes", c.anchor_sizes);
  f.get("dilations", c.dilations);
  f.get("contextual", c.contextual);
  f.get("positive_iou", c.positive_iou);
  f.get("negative_iou", c.negative_iou);
  f.get("score_threshold", c.score_threshold);
  f.get("nms_iou", c.nms_iou);
  f.get("max_dw", c.max_dw);
  f.get("logit_clamp", c.logit_clamp);
  f.get("proposal_quotas", c.proposal_quotas);
  f.get("first_scale", c.first_scale);
  f.get("last_scale", c.last_scale);
}

ordered_json config_to_json(const LossParams& c) {
  ordered_json j;
  j["alpha"] = c.alpha;
  j["lambda"] = c.lambda;
  j["rho_plus"] = c.rho_plus;
  j["rho_minus"] = c.rho_minus;
  return j;
}

void config_from_json(const json& j, LossParams& c) {
  Fields f(j, "loss");
  f.get("alpha", c.alpha);
  f.get("lambda", c.lambda);
  f.get("rho_plus", c.rho_plus);
  f.get("rho_minus", c.rho_minus);
}

ordered_json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["backbone"] = config_to_json(c.backbone);
  j["head"] = config_to_json(c.head);
  j["loss"] = config_to_json(c.loss);
  j["segment_length"] = c.segment_length;
  j["overlap"] = c.overlap;
  return j;
}

void config_from_json(const json& j, ModelConfig& c) {
  Fields f(j, "model");
  f.nested("backbone", c.backbone);
  f.nested("head", c.head);
  f.nested("loss", c.loss);
  f.get("segment_length", c.segment_length);
  f.get("overlap", c.overlap);
}

ordered_json config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["epochs"] = c.epochs;
  j["initial_lr"] = c.initial_lr;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_every"] = c.lr_decay_every;
  j["clip_norm"] = c.clip_norm;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["validate"] = c.validate;
  return j;
}

void config_from_json(const json& j, TrainConfig& c) {
  Fields f(j, "train");
  f.get("epochs", c.epochs);
  f.get("initial_lr", c.initial_lr);
  f.get("lr_decay", c.lr_decay);
  f.get("lr_decay_every", c.lr_decay_every);
  f.get("clip_norm", c.clip_norm);
  f.get("seed", c.seed);
  f.get("threads", c.threads);
  f.get("validate", c.validate);
}

RunConfig RunConfig::from_preset(const std::string& preset) {
  RunConfig c;
  c.preset = preset;
  if (preset == "desk") {
    c.model = ModelConfig::desk();
  } else if (preset == "full") {
    c.model = ModelConfig::full();
  } else {
    throw ConfigError("unknown preset '" + preset + "' (desk, full)");
  }
  return c;
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["preset"] = c.preset;
  j["synth"] = config_to_json(c.synth);
  j["model"] = config_to_json(c.model);
  j["train"] = config_to_json(c.train);
  j["tmatch"] = {{"mu", c.tmatch.mu},
                 {"zero_mean", c.tmatch.zero_mean},
                 {"nms_iou", c.tmatch.nms_iou}};
  j["ablation"] = {{"seeds", c.ablation.seeds}, {"epochs", c.ablation.epochs}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  std::string preset = "desk";
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError("config.preset: expected a string");
    preset = j.at("preset").get<std::string>();
  }
  RunConfig c = RunConfig::from_preset(preset);
  Fields f(j, "config");
  f.mark("preset");
  f.nested("synth", c.synth);
  f.nested("model", c.model);
  f.nested("train", c.train);
  if (j.contains("tmatch")) {
    Fields t(j.at("tmatch"), "tmatch");
    t.get("mu", c.tmatch.mu);
    t.get("zero_mean", c.tmatch.zero_mean);
    t.get("nms_iou", c.tmatch.nms_iou);
  }
  f.mark("tmatch");
  if (j.contains("ablation")) {
    Fields a(j.at("ablation"), "ablation");
    a.get("seeds", c.ablation.seeds);
    a.get("epochs", c.ablation.epochs);
  }
  f.mark("ablation");
  return c;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path));
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  ModelConfig c = ModelConfig::desk();
  config_from_json(read_json_file(path), c);
  return c;
}

}  // namespace ccrcnn
