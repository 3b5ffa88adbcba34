#pragma once

// Query side of the model: word embeddings, the word-level LSTM, the
// Bi-LSTM attention segmenter, mask pooling and the sub-event triplet heads.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctg/clause_seg.hpp"
#include "ctg/nn.hpp"

namespace ctg {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Token -> row lookup. Row 0 is the unknown-token row.
template <typename S>
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  template <typename Rng>
  EmbeddingTable(ParameterStore<S>& store, const std::vector<std::string>& vocabulary, std::size_t dim, Rng& rng) {
    std::vector<std::string> words;
    for (const auto& w : vocabulary) {
      auto lw = lowercase(w);
      if (!index_.count(lw)) {
        index_[lw] = words.size() + 1;
        words.push_back(lw);
      }
    }
    words_ = std::move(words);
    table_ = &store.add("embedding.table", random_uniform<S>(words_.size() + 1, dim, S(-1), S(1), rng));
  }

  std::size_t dim() const { return table_->value.cols(); }
  std::size_t vocab_size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  Parameter<S>& parameter() const { return *table_; }

  std::size_t index(const std::string& token) const {
    auto it = index_.find(lowercase(token));
    return it == index_.end() ? 0 : it->second;
  }

  std::vector<std::size_t> indices(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(index(t));
    return out;
  }

  // N x D matrix of word vectors.
  Var<S> embed_words(Tape<S>& tape, const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw std::invalid_argument("embed_words: empty token list");
    return gather_rows(tape.param(*table_), indices(tokens));
  }

  // Overwrites rows for tokens found in a text file of "token v1 ... vD" lines.
  // Returns the number of rows replaced.
  std::size_t load_pretrained(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("embeddings: cannot open " + path);
    std::string line;
    std::size_t replaced = 0, lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::istringstream ls(line);
      std::string token;
      if (!(ls >> token)) continue;
      std::vector<S> values;
      double v;
      while (ls >> v) values.push_back(static_cast<S>(v));
      if (values.size() != dim())
        throw DataError("embeddings: " + path + ":" + std::to_string(lineno) + " has " +
                        std::to_string(values.size()) + " values, expected " + std::to_string(dim()));
      auto it = index_.find(lowercase(token));
      if (it == index_.end()) continue;
      std::copy(values.begin(), values.end(), table_->value.row_ptr(it->second));
      ++replaced;
    }
    return replaced;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> words_;
  Parameter<S>* table_ = nullptr;
};

struct EventReprConfig {
  std::size_t word_dim = 100;
  std::size_t feature_dim = 1000;  // M
  std::size_t embed_dim = 100;  // M_embed
  std::size_t pos_dim = 100;  // M_pos
  std::size_t attention_hidden = 100;  // per direction
  std::size_t heads = kMaxSubEvents;  // K for the attention branch
  double lstm_lr_multiplier = 10.0;
};

// Sub-event triplets of one query: l (K x M_embed, unit rows),
// p (K x M_pos), w (K x 1, softmax over K).
template <typename S>
struct Triplets {
  Var<S> language;
  Var<S> position;
  Var<S> weight;

  std::size_t count() const { return language.rows(); }
};

template <typename S>
class EventReprNet {
 public:
  EventReprNet() = default;

  template <typename Rng>
  EventReprNet(ParameterStore<S>& store, const std::vector<std::string>& vocabulary, const EventReprConfig& cfg,
               Rng& rng)
      : cfg_(cfg),
        embedding_(store, vocabulary, cfg.word_dim, rng),
        word_lstm_(store, "word_lstm", cfg.word_dim, cfg.feature_dim, rng, static_cast<S>(cfg.lstm_lr_multiplier)),
        attn_forward_(store, "attention.forward", cfg.feature_dim, cfg.attention_hidden, rng),
        attn_backward_(store, "attention.backward", cfg.feature_dim, cfg.attention_hidden, rng),
        attn_heads_(store, "attention.heads", 2 * cfg.attention_hidden, cfg.heads, rng),
        language_head_(store, "triplet.language", cfg.feature_dim, cfg.embed_dim, rng),
        position_head_(store, "triplet.position", cfg.feature_dim, cfg.pos_dim, rng),
        weight_head_(store, "triplet.weight", cfg.feature_dim, 1, rng) {}

  const EventReprConfig& config() const { return cfg_; }
  const EmbeddingTable<S>& embedding() const { return embedding_; }
  EmbeddingTable<S>& embedding() { return embedding_; }

  Var<S> embed_words(Tape<S>& tape, const std::vector<std::string>& tokens) const {
    return embedding_.embed_words(tape, tokens);
  }

  // N x M word features f_i.
  Var<S> encode_words(Tape<S>& tape, Var<S> wordvecs) const { return word_lstm_(tape, wordvecs); }

  // K x N masks; each row is a softmax over tokens.
  Var<S> attention_masks(Tape<S>& tape, Var<S> wordfeats) const {
    auto states = concat_cols<S>({attn_forward_(tape, wordfeats), attn_backward_(tape, wordfeats, true)});
    return transpose(softmax(attn_heads_(tape, states), 0));
  }

  Triplets<S> make_triplets(Tape<S>& tape, Var<S> pooled) const {
    return {l2_normalize_rows(language_head_(tape, pooled)), position_head_(tape, pooled),
            softmax(weight_head_(tape, pooled), 0)};
  }

 private:
  EventReprConfig cfg_;
  EmbeddingTable<S> embedding_;
  Lstm<S> word_lstm_;
  Lstm<S> attn_forward_;
  Lstm<S> attn_backward_;
  Linear<S> attn_heads_;
  Linear<S> language_head_;
  Linear<S> position_head_;
  Linear<S> weight_head_;
};

// Rows divided by their sums so pooling is a convex combination.
template <typename S>
Tensor<S> normalize_masks(const SubEventMasks& masks) {
  if (masks.count() == 0) throw std::invalid_argument("pool_subevents: no masks");
  const std::size_t k = masks.count(), n = masks.words();
  Tensor<S> out(k, n);
  for (std::size_t r = 0; r < k; ++r) {
    if (masks.masks[r].size() != n) throw ShapeError("pool_subevents: ragged masks");
    double total = 0;
    for (double v : masks.masks[r]) total += v;
    if (!(total > 0)) throw std::invalid_argument("pool_subevents: mask " + std::to_string(r) + " is all zero");
    for (std::size_t i = 0; i < n; ++i) out(r, i) = static_cast<S>(masks.masks[r][i] / total);
  }
  return out;
}

// e_k = sum_i m_ki f_i with each mask normalized to sum to one.
template <typename S>
Var<S> pool_subevents(Tape<S>& tape, Var<S> wordfeats, const SubEventMasks& masks) {
  if (masks.words() != wordfeats.rows())
    throw ShapeError("pool_subevents: masks cover " + std::to_string(masks.words()) + " words, features have " +
                     std::to_string(wordfeats.rows()) + " rows");
  return matmul(tape.constant(normalize_masks<S>(masks)), wordfeats);
}

// Masks that already sum to one per row (attention output) pool by a plain product.
template <typename S>
Var<S> pool_subevents(Var<S> wordfeats, Var<S> masks) {
  return matmul(masks, wordfeats);
}

}  // namespace ctg
