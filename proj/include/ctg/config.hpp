#pragma once

// Flat JSON experiment configuration. Every field has a default; emitted
// reports embed the fully-populated config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "ctg/model.hpp"

namespace ctg {

struct ExperimentConfig {
  // dimensions
  std::size_t word_dim = 100;
  std::size_t feature_dim = 1000;
  std::size_t embed_dim = 100;
  std::size_t pos_dim = 100;
  std::size_t refine_hidden = 100;
  std::size_t attention_hidden = 100;
  std::size_t heads = 6;

  std::string mode = "parser";
  AblationFlags flags;

  // optimization
  double base_lr = 0.05;
  double lr_decay = 0.1;
  int decay_period = 33;
  int batch_size = 120;
  int max_epochs = 100;
  double lstm_lr_multiplier = 10.0;
  double inter_weight = 0.2;
  double margin = 0.1;
  int patience = 10;

  // late fusion of two separately trained modalities
  bool fusion = false;
  double fusion_lambda = 0.3;
  bool fusion_lambda_search = false;
  std::string modality = "rgb";
  std::string second_modality = "flow";

  // data
  std::string train;
  std::string val;
  std::string test;
  std::string embeddings;
  std::uint64_t seed = 0;

  // Directory that relative paths are resolved against; not serialized.
  std::filesystem::path base_dir;

  void validate() const {
    for (auto d : {word_dim, feature_dim, embed_dim, pos_dim, refine_hidden, attention_hidden, heads})
      if (d < 1) throw std::invalid_argument("config: all dimensions must be >= 1");
    parse_mode(mode);
    sgd().validate();
    if (!(lstm_lr_multiplier > 0)) throw std::invalid_argument("config: lstm_lr_multiplier must be > 0");
    if (inter_weight < 0) throw std::invalid_argument("config: inter_weight must be >= 0");
    if (margin < 0) throw std::invalid_argument("config: margin must be >= 0");
    if (patience < 1) throw std::invalid_argument("config: patience must be >= 1");
    if (fusion_lambda < 0 || fusion_lambda > 1) throw std::invalid_argument("config: fusion_lambda must lie in [0, 1]");
  }

  SgdConfig sgd() const { return {base_lr, lr_decay, decay_period, batch_size, max_epochs}; }

  ModelConfig model(std::size_t video_dim) const {
    ModelConfig m;
    m.event.word_dim = word_dim;
    m.event.feature_dim = feature_dim;
    m.event.embed_dim = embed_dim;
    m.event.pos_dim = pos_dim;
    m.event.attention_hidden = attention_hidden;
    m.event.heads = heads;
    m.event.lstm_lr_multiplier = lstm_lr_multiplier;
    m.video_dim = video_dim;
    m.refine_hidden = refine_hidden;
    m.mode = parse_mode(mode);
    m.flags = flags;
    return m;
  }

  std::string resolve(const std::string& p) const {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? p : (base_dir / path).string();
  }

  bool operator==(const ExperimentConfig& o) const { return to_json() == o.to_json(); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["word_dim"] = word_dim;
    j["feature_dim"] = feature_dim;
    j["embed_dim"] = embed_dim;
    j["pos_dim"] = pos_dim;
    j["refine_hidden"] = refine_hidden;
    j["attention_hidden"] = attention_hidden;
    j["heads"] = heads;
    j["mode"] = mode;
    j["use_masks"] = flags.use_masks;
    j["use_refinement"] = flags.use_refinement;
    j["use_position"] = flags.use_position;
    j["use_weights"] = flags.use_weights;
    j["base_lr"] = base_lr;
    j["lr_decay"] = lr_decay;
    j["decay_period"] = decay_period;
    j["batch_size"] = batch_size;
    j["max_epochs"] = max_epochs;
    j["lstm_lr_multiplier"] = lstm_lr_multiplier;
    j["inter_weight"] = inter_weight;
    j["margin"] = margin;
    j["patience"] = patience;
    j["fusion"] = fusion;
    j["fusion_lambda"] = fusion_lambda;
    j["fusion_lambda_search"] = fusion_lambda_search;
    j["modality"] = modality;
    j["second_modality"] = second_modality;
    j["train"] = train;
    j["val"] = val;
    j["test"] = test;
    j["embeddings"] = embeddings;
    j["seed"] = seed;
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    ExperimentConfig c;
    const auto known = c.to_json();
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) {
        try {
          j.at(key).get_to(field);
        } catch (const nlohmann::json::exception&) {
          throw std::invalid_argument(std::string("config: bad value for '") + key + "'");
        }
      }
    };
    get("word_dim", c.word_dim);
    get("feature_dim", c.feature_dim);
    get("embed_dim", c.embed_dim);
    get("pos_dim", c.pos_dim);
    get("refine_hidden", c.refine_hidden);
    get("attention_hidden", c.attention_hidden);
    get("heads", c.heads);
    get("mode", c.mode);
    get("use_masks", c.flags.use_masks);
    get("use_refinement", c.flags.use_refinement);
    get("use_position", c.flags.use_position);
    get("use_weights", c.flags.use_weights);
    get("base_lr", c.base_lr);
    get("lr_decay", c.lr_decay);
    get("decay_period", c.decay_period);
    get("batch_size", c.batch_size);
    get("max_epochs", c.max_epochs);
    get("lstm_lr_multiplier", c.lstm_lr_multiplier);
    get("inter_weight", c.inter_weight);
    get("margin", c.margin);
    get("patience", c.patience);
    get("fusion", c.fusion);
    get("fusion_lambda", c.fusion_lambda);
    get("fusion_lambda_search", c.fusion_lambda_search);
    get("modality", c.modality);
    get("second_modality", c.second_modality);
    get("train", c.train);
    get("val", c.val);
    get("test", c.test);
    get("embeddings", c.embeddings);
    get("seed", c.seed);
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config: malformed JSON in " + path + ": " + e.what());
    }
    auto c = from_json(j);
    c.base_dir = std::filesystem::path(path).parent_path();
    return c;
  }
};

}  // namespace ctg
