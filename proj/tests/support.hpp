#pragma once

// Oracles and fixtures shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "ctg/ctg.hpp"

namespace ctg::testing {

// ---------------------------------------------------------------------------
// Central finite differences.

struct GradProblem {
  std::unique_ptr<ParameterStore<double>> store = std::make_unique<ParameterStore<double>>();
  std::function<Var<double>(Tape<double>&)> loss;
  // Composite problems own extra state (models, masks).
  std::shared_ptr<void> keep_alive;
};

struct GradReport {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst;
};

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;
// Below this magnitude both gradients count as zero; relative error then uses it as the denominator.
// At step 1e-5 the composite graph's difference quotient carries about 5e-10 of rounding noise.
inline constexpr double kFdFloor = 1e-5;

inline std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kFdFloor});
}

// Compares tape gradients of every parameter element with a central difference quotient.
inline GradReport finite_difference_check(ParameterStore<double>& store,
                                          const std::function<Var<double>(Tape<double>&)>& loss,
                                          double step = kFdStep) {
  auto params = store.all();
  store.zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss(tape));
  }
  std::vector<Tensor<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  auto eval = [&] {
    Tape<double> tape(false);
    return loss(tape).value()[0];
  };
  GradReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = params[i]->value.data();
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double saved = v[j];
      auto at = [&](double offset) {
        v[j] = saved + offset;
        return eval();
      };
      // Five-point central stencil: truncation error O(h^4).
      const double numeric = (8 * (at(step) - at(-step)) - (at(2 * step) - at(-2 * step))) / (12 * step);
      v[j] = saved;
      const double err = relative_error(analytic[i][j], numeric);
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = params[i]->name + "[" + std::to_string(j) + "] analytic " + fmt_g(analytic[i][j]) +
                       " numeric " + fmt_g(numeric);
      }
    }
  }
  return report;
}

inline GradReport finite_difference_check(GradProblem& problem, double step = kFdStep) {
  return finite_difference_check(*problem.store, problem.loss, step);
}

// ---------------------------------------------------------------------------
// Gradient cases: each op on seeded uniform[-1, 1] inputs, reduced to a
// scalar through a fixed random weighting so every output element matters.

struct GradCase {
  std::string name;
  std::function<GradProblem(std::mt19937_64&)> make;
};

namespace detail {

inline std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Parameter<double>& input(GradProblem& p, const std::string& name, std::size_t r, std::size_t c,
                                std::mt19937_64& rng) {
  return p.store->add(name, random_uniform<double>(r, c, -1.0, 1.0, rng));
}

// sum(out .* R) with R drawn once per problem.
inline Var<double> weighted_sum(Tape<double>& tape, Var<double> out, const Tensor<double>& r) {
  return sum_all(mul(out, tape.constant(r)));
}

using Builder = std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>;

// A problem over freshly drawn inputs of the given shapes.
inline GradProblem unary_problem(std::mt19937_64& rng, std::vector<std::pair<std::size_t, std::size_t>> shapes,
                                 Builder build) {
  GradProblem p;
  std::vector<Parameter<double>*> ins;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    ins.push_back(&input(p, "x" + std::to_string(i), shapes[i].first, shapes[i].second, rng));
  // Output shape is found with a throwaway evaluation.
  Tensor<double> r;
  {
    Tape<double> tape(false);
    std::vector<Var<double>> vs;
    for (auto* in : ins) vs.push_back(tape.param(*in));
    auto out = build(tape, vs);
    r = random_uniform<double>(out.rows(), out.cols(), -1.0, 1.0, rng);
  }
  p.loss = [ins, build, r](Tape<double>& tape) {
    std::vector<Var<double>> vs;
    for (auto* in : ins) vs.push_back(tape.param(*in));
    return weighted_sum(tape, build(tape, vs), r);
  };
  return p;
}

inline std::vector<std::string> small_vocabulary() {
  return {"man", "dog", "runs", "jumps", "before", "after", "then", "the", "falls", "waves"};
}

}  // namespace detail

inline std::vector<GradCase> primitive_cases() {
  using detail::dim;
  using detail::unary_problem;
  using V = Var<double>;
  using Vs = std::vector<V>;
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, std::function<GradProblem(std::mt19937_64&)> make) {
    cases.push_back({std::move(name), std::move(make)});
  };

  add_case("matmul", [](auto& rng) {
    const auto n = dim(rng), k = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, k}, {k, m}}, [](auto&, Vs& v) { return matmul(v[0], v[1]); });
  });
  add_case("add", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}, {n, m}}, [](auto&, Vs& v) { return add(v[0], v[1]); });
  });
  add_case("add_row_broadcast", [](auto& rng) {
    const auto n = dim(rng, 2, 4), m = dim(rng);
    return unary_problem(rng, {{n, m}, {1, m}}, [](auto&, Vs& v) { return add(v[0], v[1]); });
  });
  add_case("sub", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}, {n, m}}, [](auto&, Vs& v) { return sub(v[0], v[1]); });
  });
  add_case("mul", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}, {n, m}}, [](auto&, Vs& v) { return mul(v[0], v[1]); });
  });
  add_case("mul_same_input", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return mul(v[0], v[0]); });
  });
  add_case("scale", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return scale(v[0], -1.7); });
  });
  add_case("add_const", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return add_const(v[0], 0.3); });
  });
  add_case("transpose", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return transpose(v[0]); });
  });
  add_case("concat_cols", [](auto& rng) {
    const auto n = dim(rng), a = dim(rng), b = dim(rng);
    return unary_problem(rng, {{n, a}, {n, b}}, [](auto&, Vs& v) { return concat_cols<double>({v[0], v[1], v[0]}); });
  });
  add_case("concat_rows", [](auto& rng) {
    const auto m = dim(rng), a = dim(rng), b = dim(rng);
    return unary_problem(rng, {{a, m}, {b, m}}, [](auto&, Vs& v) { return concat_rows<double>({v[0], v[1]}); });
  });
  add_case("slice_cols", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng, 3, 5);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return slice_cols(v[0], 1, 2); });
  });
  add_case("slice_rows", [](auto& rng) {
    const auto n = dim(rng, 3, 5), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return slice_rows(v[0], 1, 2); });
  });
  add_case("gather_rows", [](auto& rng) {
    const auto n = dim(rng, 2, 4), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [n](auto&, Vs& v) {
      return gather_rows(v[0], std::vector<std::size_t>{0, n - 1, 0, 1});
    });
  });
  add_case("repeat_rows", [](auto& rng) {
    const auto m = dim(rng);
    return unary_problem(rng, {{1, m}}, [](auto&, Vs& v) { return repeat_rows(v[0], 3); });
  });
  add_case("sum_axis0", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return sum(v[0], 0); });
  });
  add_case("sum_axis1", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return sum(v[0], 1); });
  });
  add_case("mean_axis0", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return mean(v[0], 0); });
  });
  add_case("mean_axis1", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return mean(v[0], 1); });
  });
  add_case("sum_all", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return sum_all(v[0]); });
  });
  add_case("sigmoid", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return sigmoid(v[0]); });
  });
  add_case("tanh", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return ctg::tanh(v[0]); });
  });
  add_case("relu", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return relu(v[0]); });
  });
  add_case("max_const", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return max_const(v[0], 0.2); });
  });
  add_case("softmax_axis0", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return softmax(v[0], 0); });
  });
  add_case("softmax_axis1", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return softmax(v[0], 1); });
  });
  add_case("l2_normalize_rows", [](auto& rng) {
    const auto n = dim(rng), m = dim(rng, 2, 4);
    return unary_problem(rng, {{n, m}}, [](auto&, Vs& v) { return l2_normalize_rows(v[0]); });
  });
  add_case("pairwise_distance", [](auto& rng) {
    const auto k = dim(rng), t = dim(rng), d = dim(rng);
    return unary_problem(rng, {{k, d}, {t, d}}, [](auto&, Vs& v) { return pairwise_distance(v[0], v[1]); });
  });
  add_case("euclidean_distance", [](auto& rng) {
    const auto d = dim(rng);
    return unary_problem(rng, {{1, d}, {1, d}}, [](auto&, Vs& v) { return euclidean_distance(v[0], v[1]); });
  });
  add_case("linear", [](auto& rng) {
    GradProblem p;
    const auto n = dim(rng), in = dim(rng), out = dim(rng);
    auto& x = detail::input(p, "x", n, in, rng);
    auto lin = std::make_shared<Linear<double>>(*p.store, "lin", in, out, rng);
    const auto r = random_uniform<double>(n, out, -1.0, 1.0, rng);
    p.keep_alive = lin;
    p.loss = [&x, lin, r](Tape<double>& t) { return detail::weighted_sum(t, (*lin)(t, t.param(x)), r); };
    return p;
  });
  add_case("lstm", [](auto& rng) {
    GradProblem p;
    const auto n = dim(rng, 1, 4), in = dim(rng), h = dim(rng);
    const bool reverse = std::bernoulli_distribution(0.5)(rng);
    auto& x = detail::input(p, "x", n, in, rng);
    auto lstm = std::make_shared<Lstm<double>>(*p.store, "lstm", in, h, rng);
    const auto r = random_uniform<double>(n, h, -1.0, 1.0, rng);
    p.keep_alive = lstm;
    p.loss = [&x, lstm, r, reverse](Tape<double>& t) {
      return detail::weighted_sum(t, (*lstm)(t, t.param(x), reverse), r);
    };
    return p;
  });
  add_case("three_layer_network", [](auto& rng) {
    GradProblem p;
    const auto n = dim(rng), a = dim(rng), b = dim(rng), c = dim(rng);
    auto& x = detail::input(p, "x", n, a, rng);
    auto l1 = std::make_shared<Linear<double>>(*p.store, "l1", a, b, rng);
    auto l2 = std::make_shared<Linear<double>>(*p.store, "l2", b, c, rng);
    auto l3 = std::make_shared<Linear<double>>(*p.store, "l3", c, 1, rng);
    p.keep_alive = std::make_shared<std::vector<std::shared_ptr<Linear<double>>>>(
        std::vector<std::shared_ptr<Linear<double>>>{l1, l2, l3});
    p.loss = [&x, l1, l2, l3](Tape<double>& t) {
      return sum_all((*l3)(t, ctg::tanh((*l2)(t, sigmoid((*l1)(t, t.param(x)))))));
    };
    return p;
  });
  return cases;
}

// A composite case checks the full query-scoring graph through a model store.
struct CompositeCase {
  std::string name;
  SegmentationMode mode;
  AblationFlags flags;
};

inline std::vector<CompositeCase> composite_cases() {
  return {
      {"composite_parser", SegmentationMode::parser, {}},
      {"composite_attention", SegmentationMode::attention, {}},
      {"composite_no_weights_no_position", SegmentationMode::parser, {true, true, false, false}},
  };
}

// Builds the composite problem and checks every model parameter.
inline GradReport check_composite(const CompositeCase& c, std::uint64_t seed, double step = kFdStep) {
  std::mt19937_64 rng(seed);
  const auto model_seed = rng();
  ModelConfig cfg;
  cfg.event.word_dim = detail::dim(rng, 2, 3);
  cfg.event.feature_dim = detail::dim(rng, 3, 4);
  cfg.event.embed_dim = detail::dim(rng, 2, 3);
  cfg.event.pos_dim = detail::dim(rng, 1, 3);
  cfg.event.attention_hidden = detail::dim(rng, 2, 3);
  cfg.event.heads = detail::dim(rng, 2, 3);
  cfg.video_dim = detail::dim(rng, 1, 3);
  cfg.refine_hidden = detail::dim(rng, 2, 3);
  cfg.mode = c.mode;
  cfg.flags = c.flags;
  CtgNet<double> model(cfg, detail::small_vocabulary(), model_seed);
  auto& out = model.refinement().mlp().output;
  out.weight->value = random_uniform<double>(out.weight->value.rows(), out.weight->value.cols(), -1.0, 1.0, rng);
  out.bias->value = random_uniform<double>(1, 1, -1.0, 1.0, rng);

  const int clips = static_cast<int>(detail::dim(rng, 2, 4));
  ClipFeatures<double> clip_features{
      "v", random_uniform<double>(static_cast<std::size_t>(clips), cfg.video_dim, -1.0, 1.0, rng)};
  const auto segments = enumerate_segments(clips);
  const auto features = segment_feature_matrix(clip_features, segments);
  QueryInput q;
  q.tokens = {"the", "man", "waves", "before", "he", "falls"};
  q.clause_masks = segment_clauses(
      parse_ptb("(S (NP (DT the) (NN man)) (VP (VBZ waves) (SBAR (IN before) (S (NP (PRP he)) (VP (VBZ falls))))))"));
  const auto r = random_uniform<double>(1, segments.size(), -1.0, 1.0, rng);

  return finite_difference_check(model.params(), [&](Tape<double>& tape) {
    auto triplets = model.encode_query(tape, q);
    return detail::weighted_sum(tape, model.score(tape, triplets, features).refined, r);
  }, step);
}

// ---------------------------------------------------------------------------
// Clause fixtures: masks written out by hand as word-index sets.

struct ClauseFixture {
  std::string name;
  std::string ptb;
  std::size_t words;
  std::vector<std::vector<std::size_t>> masks;  // indices of the words in each mask
  std::size_t clauses;
};

inline SubEventMasks masks_from_indices(std::size_t words, const std::vector<std::vector<std::size_t>>& sets) {
  SubEventMasks m;
  for (const auto& s : sets) {
    std::vector<double> row(words, 0.0);
    for (auto i : s) row[i] = 1.0;
    m.masks.push_back(row);
  }
  return m;
}

inline std::string seven_clauses() {
  std::string s = "(S";
  for (int i = 0; i < 7; ++i) {
    const auto a = "w" + std::to_string(2 * i), b = "w" + std::to_string(2 * i + 1);
    s += " (S (NN " + a + ") (VB " + b + "))";
  }
  return s + ")";
}

// Clauses of sizes 2,2,2,2,2,2,3,2 over consecutive words.
inline std::string eight_uneven_clauses() {
  std::string s = "(S";
  int w = 0;
  for (int i = 0; i < 8; ++i) {
    const int size = i == 6 ? 3 : 2;
    s += " (S";
    for (int j = 0; j < size; ++j) s += " (NN w" + std::to_string(w++) + ")";
    s += ")";
  }
  return s + ")";
}

inline std::vector<ClauseFixture> clause_fixtures() {
  return {
      {"before_he_falls",
       "(S (NP (DT the) (NN man)) (VP (VBZ waves) (SBAR (IN before) (S (NP (PRP he)) (VP (VBZ falls))))))", 6,
       {{0, 1, 2}, {4, 5}}, 3},
      {"noun_phrase_without_clause", "(NP (DT the) (NN dog))", 2, {{0, 1}}, 0},
      {"single_preterminal", "(NN dog)", 1, {{0}}, 0},
      {"flat_clause", "(S (NN a) (NN b))", 2, {{0, 1}}, 1},
      {"two_sibling_clauses", "(S (S (NN a) (NN b)) (S (NN c) (NN d)))", 4, {{0, 1}, {2, 3}}, 3},
      {"single_word_clause_fallback", "(S (VP (VB run)))", 1, {{0}}, 1},
      {"conjunction_after_discarded",
       "(S (S (NP (DT the) (NN girl)) (VP (VBZ jumps))) (SBAR (IN after) (S (NP (DT the) (NN dog)) (VP (VBZ "
       "barks)))))",
       7, {{0, 1, 2}, {4, 5, 6}}, 4},
      {"function_tag_hyphen", "(S-TPC (NP (NN man)) (VP (VBZ runs)))", 2, {{0, 1}}, 1},
      {"function_tag_equals", "(S=2 (NN a) (NN b))", 2, {{0, 1}}, 1},
      {"sinv_clause", "(SINV (VP (VBD said)) (NP (NNP john)))", 2, {{0, 1}}, 1},
      {"frag_clause", "(FRAG (NP (DT a) (NN dog)) (PP (IN in) (NP (DT the) (NN park))))", 5, {{0, 1, 2, 3, 4}}, 1},
      {"sq_not_a_clause", "(SQ (VBZ is) (NP (PRP he)) (VP (VBG running)))", 3, {{0, 1, 2}}, 0},
      {"sbarq_not_a_clause", "(SBARQ (WHNP (WP who)) (SQ (VBZ runs)))", 2, {{0, 1}}, 0},
      {"sbar_with_function_tag",
       "(S (NP (PRP he)) (VP (VBZ waits)) (SBAR-ADV (IN until) (S (NP (PRP she)) (VP (VBZ comes)))))", 5,
       {{0, 1}, {3, 4}}, 3},
      {"prefix_lookalike_label", "(X (SS (NN a) (NN b)) (NN c))", 3, {{0, 1, 2}}, 0},
      {"three_level_nesting",
       "(S (NN a) (NN b) (SBAR (IN that) (S (NN c) (NN d) (SBAR (IN that) (S (NN e) (NN f))))))", 8,
       {{0, 1}, {3, 4}, {6, 7}}, 5},
      {"words_outside_any_clause",
       "(NP (NP (DT the) (NN man)) (SBAR (WHNP (WP who)) (S (VP (VBZ runs) (ADVP (RB fast))))))", 5, {{3, 4}}, 2},
      {"seven_clauses_truncated", seven_clauses(), 14,
       {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}}, 8},
      {"eight_uneven_clauses_keep_largest", eight_uneven_clauses(), 17,
       {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {12, 13, 14}}, 9},
      {"all_single_word_clauses", "(S (S (VB go)) (S (VB stop)))", 2, {{0, 1}}, 3},
      {"empty_wrapper", "( (S (NN a) (NN b)) )", 2, {{0, 1}}, 1},
      {"whitespace_insensitive", "(S\n  (NP (NN a))\t(VP   (VB b)) )", 2, {{0, 1}}, 1},
      {"infinitival_inner_clause", "(S (NP (DT the) (NN dog)) (VP (VBZ runs) (S (VP (TO to) (VP (VB play))))))", 5,
       {{0, 1, 2}, {3, 4}}, 2},
      {"then_template",
       "(S (S (NP (NN dog)) (VP (VBZ runs))) (RB then) (S (NP (NN cat)) (VP (VBZ sits))))", 5, {{0, 1}, {3, 4}}, 3},
      {"interleaved_outer_clause", "(S (NN a) (SBAR (IN if) (S (NN b) (NN c))) (NN d))", 5, {{0, 4}, {2, 3}}, 3},
  };
}

// ---------------------------------------------------------------------------
// Metric oracle cases, expected values worked out by hand.

struct MetricCase {
  std::string name;
  int clips;
  std::vector<std::size_t> annotation_ranks;  // 1-based positions in the canonical ordering
  bool hit1, hit5;
  double iou;  // rank-1 segment is canonical (0,0)
};

inline std::vector<MetricCase> metric_cases() {
  return {
      // T=9 canonical positions: 1 (0,0), 2 (0,1), 6 (0,5), 40 (6,6).
      {"ranks_1_2_6_40", 9, {1, 2, 6, 40}, false, true, (1.0 + 0.5 + 1.0 / 6.0) / 3.0},
      {"all_four_at_rank_1", 6, {1, 1, 1, 1}, true, true, 1.0},
      // T=6 position 17 is (3,4).
      {"three_of_four_at_rank_1", 6, {1, 1, 1, 17}, true, true, 1.0},
      // Position 2 is (0,1): IoU 1/2 three times, 1 once; top three = 1, .5, .5.
      {"one_at_rank_1_three_at_rank_2", 6, {2, 2, 2, 1}, false, true, 2.0 / 3.0},
      // Position 6 is (0,5): IoU 1/6.
      {"best_three_mean_13_over_3", 6, {6, 6, 6, 1}, false, true, (1.0 + 1.0 / 6.0 + 1.0 / 6.0) / 3.0},
      // Position 5 is (0,4) (IoU 1/5), 6 is (0,5) (1/6).
      {"mean_rank_exactly_5", 6, {5, 5, 5, 6}, false, true, 1.0 / 5.0},
      // Position 8 is (1,2): disjoint from (0,0).
      {"mean_rank_above_5", 6, {8, 8, 8, 1}, false, false, 1.0 / 3.0},
      {"two_annotators_keep_best", 6, {1, 10}, true, true, 1.0},
      {"single_annotator", 6, {3}, false, true, 1.0 / 3.0},
      {"two_agree_at_rank_1", 6, {1, 1, 7, 8}, false, true, 2.0 / 3.0},
  };
}

// ---------------------------------------------------------------------------

// A fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ctg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace ctg::testing
