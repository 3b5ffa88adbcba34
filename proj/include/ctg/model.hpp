#pragma once

// The full grounding network: query triplets from the event representation
// branch, segment embeddings from the video branch, and refined scores.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctg/grounding.hpp"

namespace ctg {

enum class SegmentationMode { parser, attention };

inline std::string to_string(SegmentationMode m) { return m == SegmentationMode::parser ? "parser" : "attention"; }

inline SegmentationMode parse_mode(const std::string& s) {
  if (s == "parser") return SegmentationMode::parser;
  if (s == "attention") return SegmentationMode::attention;
  throw std::invalid_argument("unknown segmentation mode '" + s + "' (expected parser or attention)");
}

struct ModelConfig {
  EventReprConfig event;
  std::size_t video_dim = 0;  // D_video, fixed by the feature files
  std::size_t refine_hidden = 100;  // M_phi
  SegmentationMode mode = SegmentationMode::parser;
  AblationFlags flags;
};

// A query as the model consumes it. Parser mode needs the clause masks.
struct QueryInput {
  std::vector<std::string> tokens;
  std::optional<SubEventMasks> clause_masks;
};

template <typename S>
struct SegmentScores {
  Var<S> distances;  // K x S
  Var<S> combined;  // 1 x S
  Var<S> refined;  // 1 x S
};

template <typename S>
class CtgNet {
 public:
  CtgNet(const ModelConfig& cfg, const std::vector<std::string>& vocabulary, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.video_dim == 0) throw std::invalid_argument("model: video_dim must be set");
    std::mt19937_64 rng(seed);
    event_ = EventReprNet<S>(store_, vocabulary, cfg.event, rng);
    video_ = SegmentEmbedder<S>(store_, cfg.video_dim, cfg.event.embed_dim, cfg.event.embed_dim, rng);
    refine_ = RefinementNet<S>(store_, cfg.event.pos_dim, cfg.refine_hidden, rng);
  }
  CtgNet(const CtgNet&) = delete;
  CtgNet& operator=(const CtgNet&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<S>& params() { return store_; }
  const ParameterStore<S>& params() const { return store_; }
  EventReprNet<S>& event_net() { return event_; }
  const EventReprNet<S>& event_net() const { return event_; }
  const SegmentEmbedder<S>& segment_embedder() const { return video_; }
  RefinementNet<S>& refinement() { return refine_; }
  const RefinementNet<S>& refinement() const { return refine_; }

  // Sub-event masks for a query: a single whole-query mask without masks,
  // clause masks in parser mode, per-head attention otherwise. Returned as
  // normalized K x N weights on the tape.
  Var<S> query_masks(Tape<S>& tape, const QueryInput& q, Var<S> wordfeats) const {
    const std::size_t n = q.tokens.size();
    if (!cfg_.flags.use_masks) return tape.constant(Tensor<S>(1, n, S(1) / static_cast<S>(n)));
    if (cfg_.mode == SegmentationMode::parser) {
      if (!q.clause_masks) throw std::invalid_argument("model: parser mode needs clause masks");
      if (q.clause_masks->words() != n) throw ShapeError("model: clause masks do not cover the query tokens");
      return tape.constant(normalize_masks<S>(*q.clause_masks));
    }
    return event_.attention_masks(tape, wordfeats);
  }

  Triplets<S> encode_query(Tape<S>& tape, const QueryInput& q) const {
    auto feats = event_.encode_words(tape, event_.embed_words(tape, q.tokens));
    auto masks = query_masks(tape, q, feats);
    return event_.make_triplets(tape, pool_subevents(feats, masks));
  }

  // Scores a subset of one video's segments; `features` has one
  // segment_features row per candidate.
  SegmentScores<S> score(Tape<S>& tape, const Triplets<S>& query, const Tensor<S>& features) const {
    const std::size_t n = features.rows(), w = features.cols();
    Tensor<S> tef(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      tef(i, 0) = features(i, w - 2);
      tef(i, 1) = features(i, w - 1);
    }
    auto v = video_.embed(tape, tape.constant(features));
    auto d = match_subevents(query.language, v);
    auto combined = combine(tape, d, query.weight, cfg_.flags);
    auto refined = refine(tape, combined, d, query.position, tef, refine_, cfg_.flags);
    return {d, combined, refined};
  }

  // Forward-only scoring of every candidate segment of a video.
  ScoreTable<S> evaluate(const QueryInput& q, const Tensor<S>& all_features, const std::vector<Segment>& segments) const {
    Tape<S> tape(false);
    auto triplets = encode_query(tape, q);
    auto s = score(tape, triplets, all_features);
    ScoreTable<S> table;
    table.distances = s.distances.value();
    table.combined = s.combined.value().data();
    table.refined = s.refined.value().data();
    table.segments = segments;
    return table;
  }

 private:
  ModelConfig cfg_;
  ParameterStore<S> store_;
  EventReprNet<S> event_;
  SegmentEmbedder<S> video_;
  RefinementNet<S> refine_;
};

// Rows of a feature matrix picked by index.
template <typename S>
Tensor<S> select_rows(const Tensor<S>& m, const std::vector<std::size_t>& rows) {
  Tensor<S> out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(m.row_ptr(rows[i]), m.row_ptr(rows[i]) + m.cols(), out.row_ptr(i));
  return out;
}

}  // namespace ctg
