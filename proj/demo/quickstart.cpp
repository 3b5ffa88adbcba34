// Generates a small synthetic dataset, trains a compact model on it and
// prints validation and test metrics next to the Prior baseline.
//
//   quickstart [work_dir]

#include <filesystem>
#include <iostream>

#include "ctg/ctg.hpp"

using namespace ctg;

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "quickstart_data";

  SynthConfig synth;
  synth.videos = 600;
  synth.concepts = 8;
  write_synth(generate(synth), dir);

  ExperimentConfig cfg;
  cfg.base_dir = dir;
  cfg.train = "train.jsonl";
  cfg.val = "val.jsonl";
  cfg.test = "test.jsonl";
  cfg.word_dim = 16;
  cfg.feature_dim = 32;
  cfg.embed_dim = 16;
  cfg.pos_dim = 8;
  cfg.refine_hidden = 16;
  cfg.attention_hidden = 16;
  cfg.batch_size = 16;
  cfg.max_epochs = 15;
  cfg.validate();

  std::vector<ModalityData> data;
  data.push_back(load_modality(cfg, "rgb", true));
  auto run = run_training(cfg, data, [](const std::string&, const EpochLog& e) {
    std::cout << "epoch " << e.epoch << "  loss " << e.loss << "  val R@1 " << e.val.r1 << "\n";
  });

  const auto test = metrics_report(predict(*run.models[0].model, *data[0].test), data[0].test->examples);
  const auto prior = metrics_report(prior_predictions(*data[0].test), data[0].test->examples);
  std::cout << "test Average R@1 " << test.average.r1 << "  R@5 " << test.average.r5 << "  mIoU "
            << test.average.miou << "\n";
  std::cout << "Prior Average R@1 " << prior.average.r1 << "\n";
  return 0;
}
