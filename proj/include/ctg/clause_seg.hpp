#pragma once

// Penn Treebank bracketed trees and clause-based sub-event segmentation.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ctg/error.hpp"

namespace ctg {

struct PennTree {
  std::string label;  // empty for leaves
  std::string token;  // set only on leaves
  std::vector<PennTree> children;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const PennTree&) const = default;
};

// Sub-event masks: K rows of N word weights.
struct SubEventMasks {
  std::vector<std::vector<double>> masks;

  std::size_t count() const { return masks.size(); }
  std::size_t words() const { return masks.empty() ? 0 : masks.front().size(); }
};

inline constexpr std::size_t kMaxSubEvents = 6;

namespace detail {

class PtbReader {
 public:
  explicit PtbReader(std::string_view text) : text_(text) {}

  PennTree read() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("ptb: empty input", pos_);
    if (text_[pos_] != '(') throw ParseError("ptb: expected '('", pos_);
    PennTree tree = node();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("ptb: trailing characters after tree", pos_);
    // "( (S ...) )" wrappers with an empty root label are unwrapped.
    while (tree.label.empty() && tree.children.size() == 1 && !tree.children[0].is_leaf())
      tree = PennTree(tree.children[0]);
    return tree;
  }

 private:
  PennTree node() {
    const std::size_t open = pos_;
    ++pos_;  // '('
    PennTree t;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')') t.label = atom();
    while (true) {
      skip_ws();
      if (pos_ >= text_.size()) throw ParseError("ptb: unbalanced brackets, unexpected end of input", pos_);
      const char c = text_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        t.children.push_back(node());
      } else {
        PennTree leaf;
        leaf.token = atom();
        t.children.push_back(std::move(leaf));
      }
    }
    if (t.children.empty()) throw ParseError("ptb: empty node", open);
    if (t.label.empty() && t.children.size() == 1 && t.children[0].is_leaf())
      throw ParseError("ptb: token without a tag", open);
    return t;
  }

  std::string atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')')
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void serialize_into(const PennTree& t, std::string& out) {
  if (t.is_leaf()) {
    out += t.token;
    return;
  }
  out += '(';
  out += t.label;
  for (const auto& c : t.children) {
    out += ' ';
    serialize_into(c, out);
  }
  out += ')';
}

inline void collect_leaves(const PennTree& t, std::vector<std::string>& out) {
  if (t.is_leaf()) {
    out.push_back(t.token);
    return;
  }
  for (const auto& c : t.children) collect_leaves(c, out);
}

struct ClauseCandidate {
  std::vector<std::size_t> words;
};

// Walks the tree; each leaf is assigned to the innermost clause on its path.
inline void assign_words(const PennTree& t, long clause, std::vector<ClauseCandidate>& clauses,
                         std::size_t& word_index);

}  // namespace detail

inline PennTree parse_ptb(std::string_view text) { return detail::PtbReader(text).read(); }

inline std::string serialize_ptb(const PennTree& tree) {
  std::string out;
  detail::serialize_into(tree, out);
  return out;
}

inline std::vector<std::string> tree_tokens(const PennTree& tree) {
  std::vector<std::string> out;
  detail::collect_leaves(tree, out);
  return out;
}

// Clause-level tags; function suffixes such as "S-TPC" or "S=2" are ignored.
inline bool is_clause_label(std::string_view label) {
  const auto cut = label.find_first_of("-=", 1);
  const auto base = label.substr(0, cut);
  return base == "S" || base == "SBAR" || base == "SINV" || base == "FRAG";
}

inline std::size_t count_clauses(const PennTree& tree) {
  if (tree.is_leaf()) return 0;
  std::size_t n = is_clause_label(tree.label) ? 1 : 0;
  for (const auto& c : tree.children) n += count_clauses(c);
  return n;
}

namespace detail {

inline void assign_words(const PennTree& t, long clause, std::vector<ClauseCandidate>& clauses,
                         std::size_t& word_index) {
  if (t.is_leaf()) {
    if (clause >= 0) clauses[static_cast<std::size_t>(clause)].words.push_back(word_index);
    ++word_index;
    return;
  }
  if (is_clause_label(t.label)) {
    clauses.emplace_back();
    clause = static_cast<long>(clauses.size() - 1);
  }
  for (const auto& c : t.children) assign_words(c, clause, clauses, word_index);
}

}  // namespace detail

// Binary masks, one per surviving clause, ordered by first word. A clause
// survives when at least two words have it as their lowest clause ancestor.
// Words of discarded clauses are zero in every mask. At most kMaxSubEvents
// masks are kept (largest first, earlier first word on ties). Without any
// surviving clause a single all-ones mask is returned.
inline SubEventMasks segment_clauses(const PennTree& tree) {
  std::vector<detail::ClauseCandidate> clauses;
  std::size_t n = 0;
  detail::assign_words(tree, -1, clauses, n);

  std::vector<detail::ClauseCandidate> kept;
  for (auto& c : clauses)
    if (c.words.size() >= 2) kept.push_back(std::move(c));

  auto by_first_word = [](const auto& a, const auto& b) { return a.words.front() < b.words.front(); };
  std::sort(kept.begin(), kept.end(), by_first_word);
  if (kept.size() > kMaxSubEvents) {
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.words.size() > b.words.size(); });
    kept.resize(kMaxSubEvents);
    std::sort(kept.begin(), kept.end(), by_first_word);
  }

  SubEventMasks out;
  if (kept.empty()) {
    out.masks.emplace_back(n, 1.0);
    return out;
  }
  for (const auto& c : kept) {
    std::vector<double> m(n, 0.0);
    for (auto w : c.words) m[w] = 1.0;
    out.masks.push_back(std::move(m));
  }
  return out;
}

}  // namespace ctg
