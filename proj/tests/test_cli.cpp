#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>

#include "support.hpp"

using namespace ctg;
using namespace ctg::testing;

namespace {

int run(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = std::string(CTG_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const std::string& p, const std::string& text) { std::ofstream(p) << text; }

// Small generator and experiment configs that finish in seconds.
struct CliFixture {
  TempDir dir{"cli"};

  CliFixture() {
    write(dir.str("gen.json"),
          R"j({"concepts": 4, "videos": 40, "clips": 5, "video_dim": 4, "train_fraction": 0.5, "val_fraction": 0.25, "test_fraction": 0.25})j");
    write(dir.str("exp.json"), R"j({"word_dim": 6, "feature_dim": 8, "embed_dim": 6, "pos_dim": 3, "refine_hidden": 4,
      "attention_hidden": 4, "batch_size": 5, "max_epochs": 2, "base_lr": 0.1,
      "train": "data/train.jsonl", "val": "data/val.jsonl", "test": "data/test.jsonl"})j");
  }

  int generate() { return run("generate --config " + dir.str("gen.json") + " --seed 4 --out " + dir.str("data")); }
};

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train --out /tmp/x"), 1);
  EXPECT_EQ(run("train --config /nonexistent.json --out /tmp/x"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, SegmentJsonLines) {
  TempDir dir("cli_segment");
  write(dir.str("in.jsonl"),
        R"j({"id":"a","tokens":["dog","runs","then","cat","sits"],"ptb":"(S (S (NN dog) (VB runs)) (RB then) (S (NN cat) (VB sits)))"})j"
        "\n"
        R"j({"id":"b","ptb":"(NP (DT the) (NN dog))"})j"
        "\n");
  ASSERT_EQ(run("segment --dataset " + dir.str("in.jsonl") + " --out " + dir.str("out.jsonl")), 0);
  std::ifstream in(dir.str("out.jsonl"));
  std::string line;
  std::getline(in, line);
  auto a = nlohmann::json::parse(line);
  EXPECT_EQ(a["id"], "a");
  EXPECT_EQ(a["masks"], nlohmann::json::parse("[[1,1,0,0,0],[0,0,0,1,1]]"));
  std::getline(in, line);
  EXPECT_EQ(nlohmann::json::parse(line)["masks"], nlohmann::json::parse("[[1,1]]"));

  write(dir.str("bad.jsonl"), R"j({"id":"c","ptb":"(S (NN a)"})j");
  EXPECT_EQ(run("segment --dataset " + dir.str("bad.jsonl")), 2);
  write(dir.str("mismatch.jsonl"), R"j({"id":"d","tokens":["x"],"ptb":"(S (NN a) (NN b))"})j");
  EXPECT_EQ(run("segment --dataset " + dir.str("mismatch.jsonl")), 2);
  EXPECT_EQ(run("segment --dataset " + dir.str("absent.jsonl")), 2);
}

TEST(Cli, TrainGroundEvalPipeline) {
  CliFixture f;
  ASSERT_EQ(f.generate(), 0);
  const auto cfg = f.dir.str("exp.json");
  ASSERT_EQ(run("train --config " + cfg + " --seed 1 --out " + f.dir.str("run")), 0);
  EXPECT_TRUE(std::filesystem::exists(f.dir.str("run/model.rgb.ckpt")));
  ASSERT_EQ(run("ground --config " + cfg + " --checkpoint " + f.dir.str("run") + " --dataset " +
                f.dir.str("data/val.jsonl") + " --out " + f.dir.str("val_preds.jsonl")),
            0);
  ASSERT_EQ(run("eval --predictions " + f.dir.str("val_preds.jsonl") + " --dataset " + f.dir.str("data/val.jsonl") +
                " --report " + f.dir.str("val_report.json") + " --config " + cfg + " --checkpoint " + f.dir.str("run")),
            0);
  const auto log = nlohmann::json::parse(slurp(f.dir.str("run/train_log.json")));
  const auto report = nlohmann::json::parse(slurp(f.dir.str("val_report.json")));
  // Evaluating the saved model on validation reproduces the logged final score.
  EXPECT_EQ(report["metrics"]["average"], log["final_val"]["average"]);
  EXPECT_TRUE(report.contains("prior_baseline"));
  EXPECT_TRUE(report.contains("clause_buckets"));
  EXPECT_TRUE(report.contains("novelty_buckets"));
  const auto csv = slurp(f.dir.str("val_report.csv"));
  EXPECT_EQ(csv.rfind("analysis,bucket,count,r1\n", 0), 0u);
  EXPECT_NE(csv.find("novelty,Q1"), std::string::npos);

  // Missing predictions for a record is a data error.
  write(f.dir.str("empty_preds.jsonl"), "");
  EXPECT_EQ(run("eval --predictions " + f.dir.str("empty_preds.jsonl") + " --dataset " + f.dir.str("data/val.jsonl") +
                " --report " + f.dir.str("r.json")),
            2);
  // A checkpoint from another architecture is a data error.
  write(f.dir.str("other.json"), R"j({"word_dim": 5, "train": "data/train.jsonl", "val": "data/val.jsonl"})j");
  EXPECT_EQ(run("ground --config " + f.dir.str("other.json") + " --checkpoint " + f.dir.str("run") + " --dataset " +
                f.dir.str("data/val.jsonl") + " --out " + f.dir.str("x.jsonl")),
            2);
}

TEST(Cli, DataAndNumericErrors) {
  CliFixture f;
  ASSERT_EQ(f.generate(), 0);
  write(f.dir.str("missing.json"), R"j({"train": "nowhere/train.jsonl", "val": "nowhere/val.jsonl"})j");
  EXPECT_EQ(run("train --config " + f.dir.str("missing.json") + " --out " + f.dir.str("r")), 2);
  write(f.dir.str("explode.json"), R"j({"word_dim": 6, "feature_dim": 8, "embed_dim": 6, "pos_dim": 3,
    "refine_hidden": 4, "attention_hidden": 4, "batch_size": 5, "max_epochs": 3, "base_lr": 1e30,
    "train": "data/train.jsonl", "val": "data/val.jsonl"})j");
  EXPECT_EQ(run("train --config " + f.dir.str("explode.json") + " --out " + f.dir.str("r2")), 3);
  write(f.dir.str("bad_gen.json"), R"j({"clips": 1})j");
  EXPECT_EQ(run("generate --config " + f.dir.str("bad_gen.json") + " --out " + f.dir.str("g")), 1);
}

TEST(Cli, AblateWritesSevenRows) {
  CliFixture f;
  ASSERT_EQ(f.generate(), 0);
  write(f.dir.str("abl.json"), R"j({"word_dim": 4, "feature_dim": 6, "embed_dim": 4, "pos_dim": 2, "refine_hidden": 3,
    "attention_hidden": 3, "batch_size": 10, "max_epochs": 1,
    "train": "data/train.jsonl", "val": "data/val.jsonl", "test": "data/test.jsonl"})j");
  ASSERT_EQ(run("ablate --config " + f.dir.str("abl.json") + " --out " + f.dir.str("abl")), 0);
  const auto j = nlohmann::json::parse(slurp(f.dir.str("abl/ablation.json")));
  ASSERT_EQ(j["rows"].size(), 7u);
  EXPECT_EQ(j["rows"][0]["eval_set"], "test");
  const auto csv = slurp(f.dir.str("abl/ablation.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Cli, AdaptProducesLoadableDataset) {
  TempDir dir("cli_adapt");
  std::filesystem::create_directories(dir.path() / "feat");
  for (const char* m : {"rgb", "flow"})
    save_features_binary(ClipFeatures<float>{"v", Tensor<float>(3, 2, 1.0f)}, dir.str(std::string("feat/v.") + m + ".ctgf"));
  write(dir.str("ann.jsonl"), R"j({"description":"a b","video":"v","times":[[0,1],[0,1]]})j");
  ASSERT_EQ(run("adapt --annotations " + dir.str("ann.jsonl") + " --features-dir " + dir.str("feat") + " --out " +
                dir.str("d.jsonl")),
            0);
  EXPECT_EQ(load_dataset<float>(dir.str("d.jsonl"), {}).examples.size(), 1u);
  write(dir.str("none.jsonl"), R"j({"description":"a b","video":"v","times":[[5,5]]})j");
  EXPECT_EQ(run("adapt --annotations " + dir.str("none.jsonl") + " --features-dir " + dir.str("feat") + " --out " +
                dir.str("d2.jsonl")),
            2);
}
