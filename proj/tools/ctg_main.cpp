// Command-line driver: generate, segment, train, ground, eval, ablate, adapt.
//
// Exit status: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctg/ctg.hpp"

namespace fs = std::filesystem;
using namespace ctg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = ExperimentConfig::load(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << text;
}

int cmd_generate(const std::string& config_path, const std::string& out, const std::optional<std::uint64_t>& seed) {
  SynthConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::invalid_argument("cannot open " + config_path);
    cfg = SynthConfig::from_json(nlohmann::json::parse(in));
  }
  if (seed) cfg.seed = *seed;
  auto ds = generate(cfg);
  write_synth(ds, out);
  std::cerr << "generated " << ds.train.size() << " train, " << ds.val.size() << " val, " << ds.test.size()
            << " test queries in " << out << "\n";
  return kOk;
}

int cmd_segment(const std::string& input, const std::string& output) {
  std::ifstream in_file;
  std::istream* in = &std::cin;
  if (!input.empty() && input != "-") {
    in_file.open(input);
    if (!in_file) throw DataError("segment: cannot open " + input);
    in = &in_file;
  }
  std::ofstream out_file;
  std::ostream* out = &std::cout;
  if (!output.empty() && output != "-") {
    out_file.open(output);
    if (!out_file) throw DataError("segment: cannot write " + output);
    out = &out_file;
  }
  std::string line;
  while (std::getline(*in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line);
    const auto id = j.at("id").get<std::string>();
    PennTree tree;
    try {
      tree = parse_ptb(j.at("ptb").get<std::string>());
    } catch (const ParseError& e) {
      throw DataError("segment: record " + id + ": " + e.what());
    }
    if (j.contains("tokens") && j.at("tokens").size() != tree_tokens(tree).size())
      throw DataError("segment: record " + id + ": tree leaves do not match tokens");
    nlohmann::ordered_json o;
    o["id"] = id;
    o["masks"] = segment_clauses(tree).masks;
    *out << o.dump() << '\n';
  }
  return kOk;
}

std::vector<ModalityData> load_all(const ExperimentConfig& cfg, bool with_test) {
  std::vector<ModalityData> data;
  for (const auto& m : configured_modalities(cfg)) data.push_back(load_modality(cfg, m, with_test));
  return data;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out) {
  auto data = load_all(cfg, false);
  auto run = run_training(cfg, data, [](const std::string& m, const EpochLog& e) {
    std::cerr << m << " epoch " << e.epoch << " loss " << e.loss << " lr " << e.lr << " val R@1 " << e.val.r1 << "\n";
  });
  save_run(run, out);
  std::cerr << "best validation Average R@1 " << run.final_val.average.r1 << "; wrote " << out << "\n";
  return kOk;
}

std::vector<std::unique_ptr<Dataset<Real>>> load_eval_sets(const ExperimentConfig& cfg, const std::string& path) {
  std::vector<std::unique_ptr<Dataset<Real>>> out;
  for (const auto& m : configured_modalities(cfg)) {
    LoadOptions opts;
    opts.modality = m;
    opts.require_tree = parse_mode(cfg.mode) == SegmentationMode::parser && cfg.flags.use_masks;
    out.push_back(std::make_unique<Dataset<Real>>(load_dataset<Real>(path, opts)));
  }
  return out;
}

int cmd_ground(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& dataset,
               const std::string& out) {
  auto sets = load_eval_sets(cfg, dataset);
  std::vector<const Dataset<Real>*> ptrs;
  for (const auto& s : sets) ptrs.push_back(s.get());
  auto run = load_run(cfg, checkpoint, ptrs);
  write_predictions(run_predictions(run, ptrs), out);
  return kOk;
}

int cmd_eval(const std::string& predictions, const std::string& dataset, const std::string& report,
             const std::string& config_path, const std::string& checkpoint) {
  std::optional<ExperimentConfig> cfg;
  if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);
  LoadOptions opts;
  opts.modality = cfg ? cfg->modality : "rgb";
  auto ds = load_dataset<Real>(dataset, opts);
  auto preds = read_predictions(predictions);

  std::optional<std::vector<BucketRecall>> novelty;
  if (cfg && !checkpoint.empty()) {
    std::vector<const Dataset<Real>*> ptrs{&ds};
    auto single = *cfg;
    single.fusion = false;
    auto run = load_run(single, fs::is_directory(checkpoint) ? (fs::path(checkpoint) / checkpoint_name(cfg->modality)).string()
                                                             : checkpoint,
                        ptrs);
    LoadOptions vocab_opts;
    vocab_opts.load_features = false;
    auto train_examples = load_dataset<Real>(cfg->resolve(cfg->train), vocab_opts).examples;
    std::vector<std::vector<std::string>> test_q, train_q;
    for (const auto& ex : ds.examples) test_q.push_back(ex.tokens);
    for (const auto& ex : train_examples) train_q.push_back(ex.tokens);
    const auto& table = run.models[0].model->event_net().embedding();
    const auto results = example_results(align_predictions(preds, ds.examples), ds.examples);
    std::vector<bool> hits;
    for (const auto& r : results) hits.push_back(r.hit1);
    novelty = novelty_buckets(mean_embeddings(table, test_q), mean_embeddings(table, train_q), hits);
  }

  auto outputs = build_eval_report(preds, ds, novelty ? &*novelty : nullptr);
  if (cfg) outputs.report["config"] = cfg->to_json();
  write_text(report, outputs.report.dump(1) + "\n");
  auto csv_path = fs::path(report).replace_extension(".csv").string();
  write_text(csv_path, outputs.csv);
  const auto& avg = outputs.report["metrics"]["average"];
  std::cerr << "Average R@1 " << avg["r1"] << "  R@5 " << avg["r5"] << "  mIoU " << avg["miou"] << "\n";
  return kOk;
}

int cmd_ablate(const ExperimentConfig& base, const std::string& out) {
  fs::create_directories(out);
  auto table = nlohmann::ordered_json::array();
  std::ostringstream csv;
  csv << "variant,r1,r5,miou\n";
  for (const auto& [name, flags] : ablation_variants()) {
    auto cfg = base;
    cfg.flags = flags;
    auto data = load_all(cfg, true);
    auto run = run_training(cfg, data);
    std::vector<const Dataset<Real>*> eval_sets;
    for (const auto& d : data) eval_sets.push_back(d.test ? d.test.get() : d.val.get());
    const auto report = metrics_report(run_predictions(run, eval_sets), eval_sets[0]->examples);
    nlohmann::ordered_json row;
    row["variant"] = name;
    row["flags"] = {{"use_masks", flags.use_masks},
                    {"use_refinement", flags.use_refinement},
                    {"use_position", flags.use_position},
                    {"use_weights", flags.use_weights}};
    row["eval_set"] = data[0].test ? "test" : "val";
    row["metrics"] = report_json(report);
    table.push_back(row);
    csv << '"' << name << "\"," << report.average.r1 << ',' << report.average.r5 << ',' << report.average.miou << '\n';
    std::cerr << name << ": Average R@1 " << report.average.r1 << "\n";
  }
  nlohmann::ordered_json j;
  j["config"] = base.to_json();
  j["rows"] = table;
  write_text((fs::path(out) / "ablation.json").string(), j.dump(1) + "\n");
  write_text((fs::path(out) / "ablation.csv").string(), csv.str());
  return kOk;
}

int cmd_adapt(const std::string& annotations, const std::string& features_dir, const std::string& out) {
  auto summary = adapt(annotations, features_dir, out);
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "adapted " << summary.written << " records, skipped " << summary.skipped << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional temporal grounding: data generation, training and evaluation"};
  app.require_subcommand(1);

  std::string config, out, dataset, checkpoint, predictions, report, annotations, features_dir;
  std::optional<std::uint64_t> seed;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--config", config, "Generator config (JSON)");
  gen->add_option("--seed", seed, "Override the generator seed");
  gen->add_option("--out", out, "Output directory")->required();

  auto* seg = app.add_subcommand("segment", "Clause masks for bracketed trees (JSON Lines in, JSON Lines out)");
  seg->add_option("--dataset", dataset, "Input JSON Lines with {id, tokens, ptb}; stdin when omitted");
  seg->add_option("--out", out, "Output JSON Lines with {id, masks}; stdout when omitted");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config, "Experiment config (JSON)")->required();
  tr->add_option("--seed", seed, "Override the experiment seed");
  tr->add_option("--out", out, "Output directory")->required();

  auto* gr = app.add_subcommand("ground", "Rank segments for every query of a dataset");
  gr->add_option("--config", config, "Experiment config (JSON)")->required();
  gr->add_option("--checkpoint", checkpoint, "Checkpoint file or training output directory")->required();
  gr->add_option("--dataset", dataset, "Dataset file")->required();
  gr->add_option("--out", out, "Predictions file (JSON Lines)")->required();

  auto* ev = app.add_subcommand("eval", "Score predictions against a dataset");
  ev->add_option("--predictions", predictions, "Predictions file")->required();
  ev->add_option("--dataset", dataset, "Dataset file")->required();
  ev->add_option("--report", report, "Report path (JSON); a CSV is written alongside")->required();
  ev->add_option("--config", config, "Experiment config, enables the novelty analysis with --checkpoint");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file or training output directory");

  auto* ab = app.add_subcommand("ablate", "Train and evaluate the full model and six ablations");
  ab->add_option("--config", config, "Experiment config (JSON)")->required();
  ab->add_option("--seed", seed, "Override the experiment seed");
  ab->add_option("--out", out, "Output directory")->required();

  auto* ad = app.add_subcommand("adapt", "Convert external annotations to the dataset format");
  ad->add_option("--annotations", annotations, "Annotation file")->required();
  ad->add_option("--features-dir", features_dir, "Directory of feature files")->required();
  ad->add_option("--out", out, "Output dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(config, out, seed);
    if (seg->parsed()) return cmd_segment(dataset, out);
    if (tr->parsed()) return cmd_train(load_config(config, seed), out);
    if (gr->parsed()) return cmd_ground(load_config(config, std::nullopt), checkpoint, dataset, out);
    if (ev->parsed()) return cmd_eval(predictions, dataset, report, config, checkpoint);
    if (ab->parsed()) return cmd_ablate(load_config(config, seed), out);
    if (ad->parsed()) return cmd_adapt(annotations, features_dir, out);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
