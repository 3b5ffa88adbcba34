#pragma once

// End-to-end experiment driver shared by the command-line tool and the
// acceptance suite: train (optionally two modalities with late fusion),
// score datasets, and assemble reports.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctg/checkpoint.hpp"
#include "ctg/config.hpp"
#include "ctg/training.hpp"

namespace ctg {

using Real = float;

// Sorted, de-duplicated lowercase tokens of a dataset.
inline std::vector<std::string> build_vocabulary(const std::vector<AnnotatedExample>& examples) {
  std::set<std::string> words;
  for (const auto& ex : examples)
    for (const auto& t : ex.tokens) words.insert(lowercase(t));
  return {words.begin(), words.end()};
}

inline nlohmann::ordered_json metrics_json(const SplitMetrics& m) {
  nlohmann::ordered_json j;
  j["count"] = m.count;
  j["r1"] = m.r1;
  j["r5"] = m.r5;
  j["miou"] = m.miou;
  return j;
}

inline nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json splits;
  for (const auto& name : split_names())
    if (r.splits.count(name)) splits[name] = metrics_json(r.splits.at(name));
  for (const auto& [name, m] : r.splits)
    if (!splits.contains(name)) splits[name] = metrics_json(m);
  j["splits"] = splits;
  j["average"] = metrics_json(r.average);
  j["warnings"] = r.warnings;
  return j;
}

// Datasets for one modality.
struct ModalityData {
  std::string modality;
  std::unique_ptr<Dataset<Real>> train, val, test;
};

inline ModalityData load_modality(const ExperimentConfig& cfg, const std::string& modality, bool with_test) {
  LoadOptions opts;
  opts.modality = modality;
  opts.require_tree = parse_mode(cfg.mode) == SegmentationMode::parser && cfg.flags.use_masks;
  ModalityData d;
  d.modality = modality;
  if (cfg.train.empty() || cfg.val.empty()) throw DataError("config: train and val datasets are required");
  d.train = std::make_unique<Dataset<Real>>(load_dataset<Real>(cfg.resolve(cfg.train), opts));
  d.val = std::make_unique<Dataset<Real>>(load_dataset<Real>(cfg.resolve(cfg.val), opts));
  if (with_test && !cfg.test.empty())
    d.test = std::make_unique<Dataset<Real>>(load_dataset<Real>(cfg.resolve(cfg.test), opts));
  return d;
}

inline std::size_t video_dim_of(const Dataset<Real>& ds) { return ds.videos.begin()->second->clips.dim(); }

inline std::unique_ptr<CtgNet<Real>> make_model(const ExperimentConfig& cfg, const std::vector<std::string>& vocab,
                                                std::size_t video_dim, std::uint64_t seed) {
  auto model = std::make_unique<CtgNet<Real>>(cfg.model(video_dim), vocab, seed);
  if (!cfg.embeddings.empty()) model->event_net().embedding().load_pretrained(cfg.resolve(cfg.embeddings));
  return model;
}

struct TrainedModality {
  std::string modality;
  std::unique_ptr<CtgNet<Real>> model;
  TrainResult result;
};

inline nlohmann::ordered_json train_log_json(const TrainResult& r) {
  auto epochs = nlohmann::ordered_json::array();
  for (const auto& e : r.log) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["lr"] = e.lr;
    j["val"] = metrics_json(e.val);
    epochs.push_back(j);
  }
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["best_epoch"] = r.state.best_epoch;
  j["best_val_r1"] = r.state.best_val_r1;
  j["warnings"] = r.warnings;
  return j;
}

// Candidate fusion weights searched on validation.
inline std::vector<double> fusion_grid() {
  std::vector<double> out;
  for (int i = 0; i <= 10; ++i) out.push_back(i / 10.0);
  return out;
}

// Best validation Average R@1 over the grid; ties keep the earlier lambda.
inline double select_fusion_lambda(const std::vector<Prediction>& rgb, const std::vector<Prediction>& flow,
                                   const std::vector<AnnotatedExample>& val) {
  double best = -1, best_lambda = 0.3;
  for (double l : fusion_grid()) {
    const double r1 = metrics_report(fuse_predictions(rgb, flow, l), val).average.r1;
    if (r1 > best) {
      best = r1;
      best_lambda = l;
    }
  }
  return best_lambda;
}

struct ExperimentRun {
  ExperimentConfig config;
  std::vector<std::string> vocabulary;
  std::vector<TrainedModality> models;  // one, or two with fusion
  double fusion_lambda = 1.0;
  MetricsReport final_val;
  std::vector<std::string> warnings;
};

// Predictions of the run (fused when two modalities were trained).
inline std::vector<Prediction> run_predictions(const ExperimentRun& run, const std::vector<const Dataset<Real>*>& data) {
  auto preds = predict(*run.models[0].model, *data[0]);
  if (run.models.size() == 2) preds = fuse_predictions(preds, predict(*run.models[1].model, *data[1]), run.fusion_lambda);
  return preds;
}

using EpochCallback = std::function<void(const std::string& modality, const EpochLog&)>;

// Trains every configured modality; the returned run holds the best-validation parameters.
inline ExperimentRun run_training(const ExperimentConfig& cfg, std::vector<ModalityData>& data,
                                  const EpochCallback& on_epoch = {}) {
  ExperimentRun run;
  run.config = cfg;
  run.vocabulary = build_vocabulary(data[0].train->examples);
  for (const auto& d : data) run.warnings.insert(run.warnings.end(), d.train->warnings.begin(), d.train->warnings.end());
  for (std::size_t i = 0; i < data.size(); ++i) {
    TrainedModality tm;
    tm.modality = data[i].modality;
    tm.model = make_model(cfg, run.vocabulary, video_dim_of(*data[i].train), cfg.seed * 2 + i);
    TrainOptions opts;
    opts.sgd = cfg.sgd();
    opts.loss = {cfg.inter_weight, cfg.margin};
    opts.patience = cfg.patience;
    opts.seed = cfg.seed * 2 + i + 1000003;
    if (on_epoch) opts.on_epoch = [&, m = tm.modality](const EpochLog& e) { on_epoch(m, e); };
    tm.result = train(*tm.model, *data[i].train, *data[i].val, opts);
    run.models.push_back(std::move(tm));
  }
  std::vector<const Dataset<Real>*> vals;
  for (const auto& d : data) vals.push_back(d.val.get());
  if (run.models.size() == 2) {
    const auto rgb = predict(*run.models[0].model, *vals[0]);
    const auto flow = predict(*run.models[1].model, *vals[1]);
    run.fusion_lambda = cfg.fusion_lambda_search ? select_fusion_lambda(rgb, flow, vals[0]->examples) : cfg.fusion_lambda;
  }
  run.final_val = metrics_report(run_predictions(run, vals), vals[0]->examples);
  return run;
}

inline std::vector<std::string> configured_modalities(const ExperimentConfig& cfg) {
  if (cfg.fusion) return {cfg.modality, cfg.second_modality};
  return {cfg.modality};
}

inline std::string checkpoint_name(const std::string& modality) { return "model." + modality + ".ckpt"; }

// Writes checkpoints, train_log.json into `dir`.
inline void save_run(const ExperimentRun& run, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json log;
  log["config"] = run.config.to_json();
  nlohmann::ordered_json per;
  for (const auto& m : run.models) {
    save_checkpoint(m.model->params(), (fs::path(dir) / checkpoint_name(m.modality)).string());
    per[m.modality] = train_log_json(m.result);
  }
  log["modalities"] = per;
  log["fusion_lambda"] = run.fusion_lambda;
  log["final_val"] = report_json(run.final_val);
  log["warnings"] = run.warnings;
  std::ofstream os(fs::path(dir) / "train_log.json");
  if (!os) throw DataError("train: cannot write log in " + dir);
  os << log.dump(1) << '\n';
}

// Rebuilds models from a training directory (or a single checkpoint file).
inline ExperimentRun load_run(const ExperimentConfig& cfg, const std::string& checkpoint,
                              const std::vector<const Dataset<Real>*>& data) {
  namespace fs = std::filesystem;
  ExperimentRun run;
  run.config = cfg;
  LoadOptions vocab_opts;
  vocab_opts.load_features = false;
  run.vocabulary = build_vocabulary(load_dataset<Real>(cfg.resolve(cfg.train), vocab_opts).examples);
  const auto mods = configured_modalities(cfg);
  if (mods.size() != data.size()) throw std::invalid_argument("ground: dataset count does not match modalities");
  const bool is_dir = fs::is_directory(checkpoint);
  if (!is_dir && mods.size() == 2) throw std::invalid_argument("fusion needs the training output directory as checkpoint");
  for (std::size_t i = 0; i < mods.size(); ++i) {
    TrainedModality tm;
    tm.modality = mods[i];
    tm.model = std::make_unique<CtgNet<Real>>(cfg.model(video_dim_of(*data[i])), run.vocabulary, 0);
    load_checkpoint(tm.model->params(), is_dir ? (fs::path(checkpoint) / checkpoint_name(mods[i])).string() : checkpoint);
    run.models.push_back(std::move(tm));
  }
  if (mods.size() == 2) {
    std::ifstream in(fs::path(checkpoint) / "train_log.json");
    if (!in) throw DataError("ground: missing train_log.json in " + checkpoint);
    nlohmann::json log;
    in >> log;
    run.fusion_lambda = log.at("fusion_lambda").get<double>();
  }
  return run;
}

inline void write_predictions(const std::vector<Prediction>& preds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("ground: cannot write " + path);
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    auto ranked = nlohmann::json::array();
    auto scores = nlohmann::json::array();
    for (auto i : rank_order(p.scores, p.segments)) {
      ranked.push_back(segment_json(p.segments[i]));
      scores.push_back(p.scores[i]);
    }
    j["ranked_segments"] = ranked;
    j["scores"] = scores;
    os << j.dump() << '\n';
  }
}

// Reads predictions back; segments keep the file's ranked order with their scores.
inline std::vector<Prediction> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("eval: cannot open predictions " + path);
  std::vector<Prediction> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Prediction p;
      p.id = j.at("id").get<std::string>();
      for (const auto& s : j.at("ranked_segments")) p.segments.push_back(segment_from_json(s));
      p.scores = j.at("scores").get<std::vector<double>>();
      if (p.scores.size() != p.segments.size()) throw DataError("score count mismatch");
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw DataError("eval: bad prediction line in " + path + ": " + e.what());
    }
  }
  return out;
}

// Orders predictions like the dataset; every record must have one.
inline std::vector<Prediction> align_predictions(const std::vector<Prediction>& preds,
                                                 const std::vector<AnnotatedExample>& examples) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : preds) by_id[p.id] = &p;
  std::vector<Prediction> out;
  for (const auto& ex : examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) throw DataError("eval: no prediction for record " + ex.id);
    out.push_back(*it->second);
  }
  return out;
}

struct EvalOutputs {
  nlohmann::ordered_json report;
  std::string csv;
};

// Report JSON (per-split table, average, Prior baseline, clause-count
// buckets) and a CSV of the bucket analyses.
inline EvalOutputs build_eval_report(const std::vector<Prediction>& preds, const Dataset<Real>& ds,
                                     const std::vector<BucketRecall>* novelty = nullptr) {
  const auto aligned = align_predictions(preds, ds.examples);
  const auto results = example_results(aligned, ds.examples);
  const auto report = metrics_report(results, ds.examples);
  const auto prior = metrics_report(prior_predictions(ds), ds.examples);

  EvalOutputs out;
  out.report["metrics"] = report_json(report);
  out.report["prior_baseline"] = report_json(prior);
  auto warnings = ds.warnings;
  out.report["data_warnings"] = warnings;

  std::ostringstream csv;
  csv << "analysis,bucket,count,r1\n";
  for (const auto& [name, m] : report.splits) csv << "split," << name << ',' << m.count << ',' << m.r1 << '\n';

  std::vector<std::size_t> clause_counts;
  std::vector<bool> hits;
  bool have_trees = true;
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    if (!ds.examples[i].clause_count) have_trees = false;
    clause_counts.push_back(ds.examples[i].clause_count.value_or(0));
    hits.push_back(results[i].hit1);
  }
  if (have_trees) {
    auto buckets = complexity_buckets(clause_counts, hits);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : buckets) {
      arr.push_back({{"clauses", b.bucket}, {"count", b.count}, {"r1", b.r1}});
      csv << "clauses," << b.bucket << ',' << b.count << ',' << b.r1 << '\n';
    }
    out.report["clause_buckets"] = arr;
  }
  if (novelty) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : *novelty) {
      arr.push_back({{"quartile", b.bucket}, {"count", b.count}, {"r1", b.r1}});
      csv << "novelty," << b.bucket << ',' << b.count << ',' << b.r1 << '\n';
    }
    out.report["novelty_buckets"] = arr;
  }
  out.csv = csv.str();
  return out;
}

// The seven ablation variants, from the bare single-sub-event matcher to the full model.
inline std::vector<std::pair<std::string, AblationFlags>> ablation_variants() {
  return {
      {"w/o m_k, phi", {false, false, true, true}},
      {"w/o m_k", {false, true, true, true}},
      {"w/o phi", {true, false, true, true}},
      {"w/o p_k, w_k", {true, true, false, false}},
      {"w/o p_k", {true, true, false, true}},
      {"w/o w_k", {true, true, true, false}},
      {"full", {true, true, true, true}},
  };
}

}  // namespace ctg
