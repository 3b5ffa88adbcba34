#pragma once

// Triplet ranking loss with intra- and inter-video negatives, and the epoch
// loop with step-decayed SGD and early stopping on validation Average R@1.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctg/inference.hpp"

namespace ctg {

// max(0, pos - neg + margin); lower scores are better.
inline double triplet_loss(double pos, double neg, double margin) { return std::max(0.0, pos - neg + margin); }

template <typename S>
Var<S> triplet_loss(Var<S> pos, Var<S> neg, S margin) {
  return max_const(add_const(sub(pos, neg), margin), S(0));
}

// Per-record loss: intra term plus the weighted inter term when one was sampled.
inline double record_loss(double intra, std::optional<double> inter, double inter_weight) {
  return intra + (inter ? inter_weight * *inter : 0.0);
}

struct InterNegative {
  std::string video_id;
  Segment segment;
};

struct NegativeSample {
  Segment intra;
  std::optional<InterNegative> inter;
};

inline constexpr int kInterResampleLimit = 50;

// Intra: uniform over the video's other segments. Inter: a uniformly drawn
// other video long enough to hold the positive span, resampled up to 50 times.
template <typename S, typename Rng>
NegativeSample sample_negatives(const AnnotatedExample& ex, const Dataset<S>& ds,
                                const std::vector<std::string>& video_ids, Rng& rng) {
  const auto& v = ds.video(ex.video_id);
  const int t = v.clips.num_clips();
  const std::size_t count = v.segments.size();
  if (count < 2) throw std::invalid_argument("sample_negatives: video " + ex.video_id + " has a single segment");
  const std::size_t pos = segment_index(ex.ground_truth, t);
  std::uniform_int_distribution<std::size_t> pick(0, count - 2);
  std::size_t idx = pick(rng);
  if (idx >= pos) ++idx;

  NegativeSample out{v.segments[idx], std::nullopt};
  if (video_ids.size() < 2) return out;
  std::uniform_int_distribution<std::size_t> pick_video(0, video_ids.size() - 1);
  for (int attempt = 0; attempt < kInterResampleLimit; ++attempt) {
    const auto& other = video_ids[pick_video(rng)];
    if (other == ex.video_id) continue;
    if (ex.ground_truth.valid_for(ds.video(other).clips.num_clips())) {
      out.inter = InterNegative{other, ex.ground_truth};
      break;
    }
  }
  return out;
}

struct TripletRecord {
  std::size_t example = 0;  // index into the dataset
  NegativeSample negatives;
};

struct LossWeights {
  double inter_weight = 0.2;
  double margin = 0.1;
};

// Mean over records of L(pos, intra) + lambda * L(pos, inter), built on `tape`.
template <typename S>
Var<S> batch_loss(Tape<S>& tape, const CtgNet<S>& model, const Dataset<S>& ds,
                  const std::vector<TripletRecord>& batch, const LossWeights& w) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const S margin = static_cast<S>(w.margin);
  std::vector<Var<S>> losses;
  losses.reserve(batch.size());
  for (const auto& rec : batch) {
    const auto& ex = ds.examples[rec.example];
    const auto& v = ds.video(ex.video_id);
    const int t = v.clips.num_clips();
    auto triplets = model.encode_query(tape, ex.query());
    auto feats = select_rows(v.segment_features,
                             {segment_index(ex.ground_truth, t), segment_index(rec.negatives.intra, t)});
    auto scores = model.score(tape, triplets, feats).refined;
    auto pos = slice_cols(scores, 0, 1);
    auto loss = triplet_loss(pos, slice_cols(scores, 1, 1), margin);
    if (rec.negatives.inter && w.inter_weight > 0) {
      const auto& other = ds.video(rec.negatives.inter->video_id);
      auto inter_feats = select_rows(
          other.segment_features, {segment_index(rec.negatives.inter->segment, other.clips.num_clips())});
      auto inter = model.score(tape, triplets, inter_feats).refined;
      loss = add(loss, scale(triplet_loss(pos, inter, margin), static_cast<S>(w.inter_weight)));
    }
    losses.push_back(loss);
  }
  return scale(sum_all(concat_cols(losses)), S(1) / static_cast<S>(batch.size()));
}

struct EpochLog {
  int epoch = 0;
  double loss = 0;  // mean training loss over the epoch's batches
  double lr = 0;
  SplitMetrics val;  // Average row
};

struct TrainState {
  int epoch = 0;
  double best_val_r1 = -1;
  int best_epoch = -1;
  int epochs_since_improvement = 0;
};

struct TrainOptions {
  SgdConfig sgd;
  LossWeights loss;
  int patience = 10;
  std::uint64_t seed = 0;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochLog> log;
  TrainState state;
  std::vector<std::string> warnings;
};

// Runs until max_epochs or until validation Average R@1 has not improved for
// `patience` epochs, then restores the best-validation parameters.
template <typename S>
TrainResult train(CtgNet<S>& model, const Dataset<S>& train_set, const Dataset<S>& val_set, const TrainOptions& opts) {
  opts.sgd.validate();
  std::mt19937_64 rng(opts.seed);
  TrainResult result;
  const auto video_ids = train_set.video_ids();
  if (video_ids.size() < 2) result.warnings.push_back("single training video: inter-video negatives skipped");

  auto params = model.params().all();
  model.params().zero_grad();
  auto best = model.params().snapshot();
  std::vector<std::size_t> order(train_set.examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto& st = result.state;
  for (st.epoch = 0; st.epoch < opts.sgd.max_epochs; ++st.epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += opts.sgd.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(opts.sgd.batch_size));
      std::vector<TripletRecord> batch;
      for (std::size_t i = begin; i < end; ++i)
        batch.push_back({order[i], sample_negatives(train_set.examples[order[i]], train_set, video_ids, rng)});
      Tape<S> tape;
      auto loss = batch_loss(tape, model, train_set, batch, opts.loss);
      const double value = loss.value()[0];
      if (!std::isfinite(value))
        throw NumericError("training: non-finite loss at epoch " + std::to_string(st.epoch) + ", batch " +
                           std::to_string(batches));
      tape.backward(loss);
      sgd_step(params, st.epoch, opts.sgd);
      loss_sum += value;
      ++batches;
    }

    EpochLog entry;
    entry.epoch = st.epoch;
    entry.loss = loss_sum / std::max(1, batches);
    entry.lr = opts.sgd.rate(st.epoch);
    entry.val = metrics_report(predict(model, val_set), val_set.examples).average;
    result.log.push_back(entry);
    if (opts.on_epoch) opts.on_epoch(entry);

    if (entry.val.r1 > st.best_val_r1) {
      st.best_val_r1 = entry.val.r1;
      st.best_epoch = st.epoch;
      st.epochs_since_improvement = 0;
      best = model.params().snapshot();
    } else if (++st.epochs_since_improvement >= opts.patience) {
      ++st.epoch;
      break;
    }
  }
  model.params().restore(best);
  return result;
}

}  // namespace ctg
