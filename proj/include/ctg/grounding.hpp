#pragma once

// Scoring of candidate segments against a query: sub-event matching,
// weighted combination, additive temporal refinement, selection and late
// fusion. Lower scores are better throughout.

#include <algorithm>
#include <numeric>
#include <vector>

#include "ctg/event_repr.hpp"
#include "ctg/video_repr.hpp"

namespace ctg {

struct AblationFlags {
  bool use_masks = true;
  bool use_refinement = true;
  bool use_position = true;
  bool use_weights = true;

  bool operator==(const AblationFlags&) const = default;
};

// phi(D_t, d_kt, p_k, s/T, (e+1)/T): two dense layers, scalar output. The
// output layer starts at zero so an untrained net leaves scores unchanged.
template <typename S>
class RefinementNet {
 public:
  RefinementNet() = default;
  template <typename Rng>
  RefinementNet(ParameterStore<S>& store, std::size_t pos_dim, std::size_t hidden, Rng& rng)
      : pos_dim_(pos_dim), mlp_(store, "refine", 4 + pos_dim, hidden, 1, rng) {
    mlp_.output.zero_init();
  }

  std::size_t pos_dim() const { return pos_dim_; }
  std::size_t input_dim() const { return 4 + pos_dim_; }

  // inputs: one row [D_t | d_kt | p_k | s/T | (e+1)/T] per evaluation.
  Var<S> operator()(Tape<S>& tape, Var<S> inputs) const { return mlp_(tape, inputs); }

  Mlp2<S>& mlp() { return mlp_; }
  const Mlp2<S>& mlp() const { return mlp_; }

 private:
  std::size_t pos_dim_ = 0;
  Mlp2<S> mlp_;
};

// d(k, t) = ||l_k - v_t||
template <typename S>
Var<S> match_subevents(Var<S> language, Var<S> segments) {
  if (language.cols() != segments.cols())
    throw ShapeError("match_subevents: language embedding width " + std::to_string(language.cols()) +
                     " != segment embedding width " + std::to_string(segments.cols()));
  return pairwise_distance(language, segments);
}

// D_t = sum_k w_k d(k, t) as a 1 x S row; uniform weights when use_weights is off.
template <typename S>
Var<S> combine(Tape<S>& tape, Var<S> distances, Var<S> weights, const AblationFlags& flags) {
  const std::size_t k = distances.rows();
  auto w = flags.use_weights ? weights : tape.constant(Tensor<S>(k, 1, S(1) / static_cast<S>(k)));
  if (w.rows() != k || w.cols() != 1)
    throw ShapeError("combine: weights " + shape_str(w.value()) + " for " + std::to_string(k) + " sub-events");
  return matmul(transpose(w), distances);
}

// D~_t = D_t + sum_k phi(D_t, d_kt, p_k, t). `tef` holds (s/T, (e+1)/T) per segment.
template <typename S>
Var<S> refine(Tape<S>& tape, Var<S> combined, Var<S> distances, Var<S> positions, const Tensor<S>& tef,
              const RefinementNet<S>& net, const AblationFlags& flags) {
  if (!flags.use_refinement) return combined;
  const std::size_t k = distances.rows(), n = distances.cols();
  if (tef.rows() != n || tef.cols() != 2) throw ShapeError("refine: tef must be S x 2, got " + shape_str(tef));
  if (positions.cols() != net.pos_dim())
    throw ShapeError("refine: position width " + std::to_string(positions.cols()) + " vs refinement input " +
                     std::to_string(net.pos_dim()));
  auto pos = flags.use_position ? positions : tape.constant(Tensor<S>(k, net.pos_dim()));
  auto combined_col = transpose(combined);
  auto tef_var = tape.constant(tef);
  std::vector<Var<S>> rows;
  rows.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    rows.push_back(concat_cols<S>({combined_col, transpose(slice_rows(distances, i, 1)),
                                   repeat_rows(slice_rows(pos, i, 1), n), tef_var}));
  }
  // All K*S evaluations go through one batched pass, then fold back per segment.
  auto phi = net(tape, concat_rows(rows));  // (K*S) x 1, sub-event major
  auto per_subevent = transpose(phi);  // 1 x (K*S)
  Var<S> correction = slice_cols(per_subevent, 0, n);
  for (std::size_t i = 1; i < k; ++i) correction = add(correction, slice_cols(per_subevent, i * n, n));
  return add(combined, correction);
}

// Plain-value copy of the per-query scores.
template <typename S>
struct ScoreTable {
  Tensor<S> distances;  // K x S
  std::vector<S> combined;  // D
  std::vector<S> refined;  // D~
  std::vector<Segment> segments;
};

// Indices sorted by (score, start, end); position 0 is rank 1.
template <typename S>
std::vector<std::size_t> rank_order(const std::vector<S>& scores, const std::vector<Segment>& segments) {
  if (scores.size() != segments.size()) throw std::invalid_argument("rank_segments: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return segments[a] < segments[b];
  });
  return order;
}

template <typename S>
std::vector<Segment> rank_segments(const std::vector<S>& scores, const std::vector<Segment>& segments) {
  std::vector<Segment> out;
  for (auto i : rank_order(scores, segments)) out.push_back(segments[i]);
  return out;
}

// argmin with ties resolved toward the canonical order.
template <typename S>
Segment ground(const std::vector<S>& scores, const std::vector<Segment>& segments) {
  if (scores.empty()) throw std::invalid_argument("ground: no scores");
  return rank_segments(scores, segments).front();
}

// lambda * rgb + (1 - lambda) * flow
template <typename S>
std::vector<S> late_fusion(const std::vector<S>& rgb, const std::vector<S>& flow, double lambda_rgb) {
  if (rgb.size() != flow.size())
    throw std::invalid_argument("late_fusion: length mismatch " + std::to_string(rgb.size()) + " vs " +
                                std::to_string(flow.size()));
  std::vector<S> out(rgb.size());
  const S l = static_cast<S>(lambda_rgb);
  for (std::size_t i = 0; i < rgb.size(); ++i) out[i] = l * rgb[i] + (S(1) - l) * flow[i];
  return out;
}

}  // namespace ctg
