#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "support.hpp"

using namespace ctg;
using namespace ctg::testing;

namespace {

SynthConfig small(std::uint64_t seed = 3) {
  SynthConfig c;
  c.concepts = 6;
  c.videos = 60;
  c.clips = 6;
  c.video_dim = 8;
  c.train_fraction = 0.5;
  c.val_fraction = 0.25;
  c.test_fraction = 0.25;
  c.seed = seed;
  return c;
}

// Independent answer: spans of X and Y plus the template's temporal relation.
Segment expected_answer(const QueryMeta& q, const std::vector<Plant>& plants) {
  const Plant* x_first = nullptr;
  const Plant* x_last = nullptr;
  const Plant* y = nullptr;
  for (const auto& p : plants) {
    if (p.concept_id == q.x) {
      if (!x_first) x_first = &p;
      x_last = &p;
    }
    if (p.concept_id == q.y) y = &p;
  }
  switch (q.tmpl) {
    case Template::base: return x_first->span;
    case Template::before_xy:
    case Template::after_yx: return x_first->span;  // X happens first
    case Template::before_yx:
    case Template::after_xy: return x_last->span;  // X happens second
    case Template::then: return {x_first->span.start, y->span.end};
  }
  return {};
}

std::vector<AnnotatedExample> all_examples(const SynthDataset& ds) {
  auto out = ds.train;
  out.insert(out.end(), ds.val.begin(), ds.val.end());
  out.insert(out.end(), ds.test.begin(), ds.test.end());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Synth, TemplateSentences) {
  Concept x{"dog", "runs", {}}, y{"cat", "sits", {}};
  auto words = [](const std::string& t) { return tree_tokens(parse_ptb(t)); };
  using V = std::vector<std::string>;
  EXPECT_EQ(words(ctg::detail::query_tree(Template::before_xy, x, &y)), (V{"dog", "runs", "before", "cat", "sits"}));
  EXPECT_EQ(words(ctg::detail::query_tree(Template::before_yx, x, &y)), (V{"cat", "sits", ",", "before", "dog", "runs"}));
  EXPECT_EQ(words(ctg::detail::query_tree(Template::after_xy, x, &y)), (V{"dog", "runs", "after", "cat", "sits"}));
  EXPECT_EQ(words(ctg::detail::query_tree(Template::then, x, &y)), (V{"dog", "runs", "then", "cat", "sits"}));
  EXPECT_EQ(words(ctg::detail::query_tree(Template::base, x, nullptr)), (V{"dog", "runs"}));
}

TEST(Synth, TreesGiveExpectedMaskCounts) {
  Concept x{"dog", "runs", {}}, y{"cat", "sits", {}};
  for (auto t : kTemplates) {
    const auto tree = parse_ptb(ctg::detail::query_tree(t, x, t == Template::base ? nullptr : &y));
    EXPECT_EQ(segment_clauses(tree).count(), t == Template::base ? 1u : 2u) << to_string(t);
  }
}

TEST(Synth, OracleDerivedExamples) {
  const std::vector<Plant> plants{{0, {0, 1}}, {1, {3, 3}}};
  EXPECT_EQ(oracle_ground({Template::before_xy, 0, 1}, plants), (Segment{0, 1}));
  EXPECT_EQ(oracle_ground({Template::after_xy, 1, 0}, plants), (Segment{3, 3}));
  EXPECT_EQ(oracle_ground({Template::then, 0, 1}, plants), (Segment{0, 3}));
  EXPECT_EQ(oracle_ground({Template::base, 1, -1}, plants), (Segment{3, 3}));
  EXPECT_THROW(oracle_ground({Template::before_xy, 1, 0}, plants), std::invalid_argument);
  const std::vector<Plant> xyx{{0, {0, 0}}, {1, {2, 2}}, {0, {4, 5}}};
  EXPECT_EQ(oracle_ground({Template::before_xy, 0, 1}, xyx), (Segment{0, 0}));
  EXPECT_EQ(oracle_ground({Template::after_xy, 0, 1}, xyx), (Segment{4, 5}));
}

TEST(Synth, GroundTruthAgreesWithIndependentOracle) {
  for (bool both : {false, true}) {
    auto cfg = small();
    if (both) {
      cfg.template_mix = {1, 1, 1, 1, 0, 0};
      cfg.both_orders = true;
    }
    const auto ds = generate(cfg);
    for (const auto& ex : all_examples(ds)) {
      const auto& q = ds.meta.at(ex.id);
      const auto& v = ds.videos[ds.video_index.at(ex.video_id)];
      EXPECT_EQ(ex.ground_truth, expected_answer(q, v.plants)) << ex.id;
      EXPECT_EQ(ex.annotations.size(), 4u);
      EXPECT_EQ(segment_clauses(parse_ptb(*ex.ptb)).count(), q.tmpl == Template::base ? 1u : 2u);
      EXPECT_EQ(ex.split, split_label(ex.tokens));
    }
  }
}

TEST(Synth, PlantsAreDisjointWithGaps) {
  const auto ds = generate(small());
  for (const auto& v : ds.videos) {
    for (std::size_t i = 0; i < v.plants.size(); ++i) {
      EXPECT_TRUE(v.plants[i].span.valid_for(6));
      if (i) {
        EXPECT_GE(v.plants[i].span.start, v.plants[i - 1].span.end + 2);
      }
    }
    EXPECT_NE(v.plants[0].concept_id, v.plants[1].concept_id);
  }
}

TEST(Synth, TemplateClassBalance) {
  const auto ds = generate(small());
  std::map<Template, int> counts;
  for (const auto& [_, q] : ds.meta) ++counts[q.tmpl];
  for (auto t : kTemplates) EXPECT_EQ(counts[t], 10) << to_string(t);

  auto cfg = small();
  cfg.template_mix = {1, 1, 1, 1, 1, 0};
  std::map<Template, int> five;
  for (const auto& [_, q] : generate(cfg).meta) ++five[q.tmpl];
  EXPECT_EQ(five[Template::base], 0);
  EXPECT_EQ(five[Template::then], 12);
}

TEST(Synth, SplitsAreDisjointAndSized) {
  const auto ds = generate(small());
  EXPECT_EQ(ds.train.size(), 30u);
  EXPECT_EQ(ds.val.size(), 15u);
  EXPECT_EQ(ds.test.size(), 15u);
  std::set<std::string> videos;
  for (const auto& ex : all_examples(ds)) EXPECT_TRUE(videos.insert(ex.video_id).second);
}

TEST(Synth, ConceptsRespectMinimumDistance) {
  auto cfg = small();
  cfg.min_concept_distance = 0.8;
  const auto ds = generate(cfg);
  for (std::size_t i = 0; i < ds.concepts.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double d = 0;
      for (std::size_t k = 0; k < cfg.video_dim; ++k)
        d += std::pow(ds.concepts[i].vector[k] - ds.concepts[j].vector[k], 2);
      EXPECT_GE(std::sqrt(d), 0.8);
    }
}

TEST(Synth, NoiseFreeFeaturesMatchLatents) {
  auto cfg = small();
  cfg.noise = 0;
  cfg.flow_signal = false;
  cfg.flow_noise = 0;
  const auto ds = generate(cfg);
  const auto& v = ds.videos[0];
  for (const auto& p : v.plants)
    for (int t = p.span.start; t <= p.span.end; ++t)
      for (std::size_t j = 0; j < cfg.video_dim; ++j) {
        EXPECT_FLOAT_EQ(v.rgb(t, j), static_cast<float>(ds.concepts[p.concept_id].vector[j]));
        EXPECT_EQ(v.flow(t, j), 0.0f);
      }
}

TEST(Synth, RegenerationIsByteIdentical) {
  TempDir a("synth_a"), b("synth_b"), c("synth_c");
  write_synth(generate(small(5)), a.path().string());
  write_synth(generate(small(5)), b.path().string());
  write_synth(generate(small(6)), c.path().string());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 3u + 1u + 2u * 60u);
  EXPECT_NE(slurp(a.path() / "train.jsonl"), slurp(c.path() / "train.jsonl"));
}

TEST(Synth, ManifestReproducesAnswers) {
  TempDir dir("synth_manifest");
  const auto ds = generate(small());
  write_synth(ds, dir.path().string());
  const auto m = load_manifest(dir.str("manifest.json"));
  LoadOptions opts;
  opts.require_tree = true;
  const auto test = load_dataset<float>(dir.str("test.jsonl"), opts);
  for (const auto& ex : test.examples)
    EXPECT_EQ(oracle_ground(m.queries.at(ex.id), m.plants.at(ex.video_id)), ex.ground_truth);
}

TEST(Synth, ConfigValidation) {
  auto bad = small();
  bad.clips = 2;
  EXPECT_THROW(generate(bad), std::invalid_argument);
  bad = small();
  bad.both_orders = true;  // then/base not supported with repeated targets
  EXPECT_THROW(generate(bad), std::invalid_argument);
  bad = small();
  bad.train_fraction = 0.9;
  EXPECT_THROW(generate(bad), std::invalid_argument);
  EXPECT_THROW(SynthConfig::from_json({{"nonsense", 1}}), std::invalid_argument);
  const auto c = small();
  EXPECT_EQ(SynthConfig::from_json(c.to_json()).to_json(), c.to_json());
}
