#pragma once

// Evaluation: IoU, per-example rank metrics with the drop-worst annotator
// rule, equal-weight averaging over temporal-word splits, the Prior
// baseline, and the clause-count / query-novelty breakdowns.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ctg/event_repr.hpp"
#include "ctg/video_repr.hpp"

namespace ctg {

// Split labels in priority order; "base" is the fallback.
inline const std::array<std::string, 5>& split_names() {
  static const std::array<std::string, 5> names{"before", "after", "then", "while", "base"};
  return names;
}

inline std::string split_label(const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& word = split_names()[i];
    for (const auto& t : tokens)
      if (lowercase(t) == word) return word;
  }
  return "base";
}

// True when more than one temporal word occurs, so the priority order decided the label.
inline bool split_is_ambiguous(const std::vector<std::string>& tokens) {
  int found = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& word = split_names()[i];
    if (std::any_of(tokens.begin(), tokens.end(), [&](const auto& t) { return lowercase(t) == word; })) ++found;
  }
  return found > 1;
}

// Clip-level intersection over union of inclusive spans.
inline double iou(const Segment& a, const Segment& b) {
  const int inter = std::min(a.end, b.end) - std::max(a.start, b.start) + 1;
  if (inter <= 0) return 0.0;
  const int uni = std::max(a.end, b.end) - std::min(a.start, b.start) + 1;
  return static_cast<double>(inter) / uni;
}

struct ExampleResult {
  bool hit1 = false;
  bool hit5 = false;
  double iou = 0.0;  // mean of the kept IoUs
  double rank_score = 0.0;  // mean of the kept annotation ranks
};

// With A annotations the best max(1, A-1) agree-scores are kept: top IoUs of
// the rank-1 segment, and the lowest (best) ranks of the annotations in the
// predicted ordering. hit@k holds when the mean kept rank is at most k.
inline ExampleResult example_metrics(const std::vector<Segment>& ranking, const std::vector<Segment>& annotations) {
  if (ranking.empty()) throw std::invalid_argument("example_metrics: empty ranking");
  if (annotations.empty()) throw std::invalid_argument("example_metrics: no annotations");
  const std::size_t keep = std::max<std::size_t>(1, annotations.size() - 1);

  std::vector<double> ious;
  std::vector<double> ranks;
  for (const auto& a : annotations) {
    ious.push_back(iou(ranking.front(), a));
    auto it = std::find(ranking.begin(), ranking.end(), a);
    if (it == ranking.end())
      throw std::invalid_argument("example_metrics: annotation " + to_string(a) + " missing from the ranking");
    ranks.push_back(static_cast<double>(it - ranking.begin() + 1));
  }
  std::sort(ious.begin(), ious.end(), std::greater<>());
  std::sort(ranks.begin(), ranks.end());

  ExampleResult r;
  r.iou = std::accumulate(ious.begin(), ious.begin() + keep, 0.0) / keep;
  r.rank_score = std::accumulate(ranks.begin(), ranks.begin() + keep, 0.0) / keep;
  r.hit1 = r.rank_score <= 1.0;
  r.hit5 = r.rank_score <= 5.0;
  return r;
}

struct SplitMetrics {
  std::size_t count = 0;
  double r1 = 0, r5 = 0, miou = 0;
};

struct MetricsReport {
  std::map<std::string, SplitMetrics> splits;  // only non-empty splits
  SplitMetrics average;  // unweighted mean over the splits present; count is the total
  std::vector<std::string> warnings;
};

struct LabeledResult {
  std::string split;
  ExampleResult result;
};

inline SplitMetrics summarize(const std::vector<ExampleResult>& results) {
  SplitMetrics m;
  m.count = results.size();
  if (results.empty()) return m;
  for (const auto& r : results) {
    m.r1 += r.hit1;
    m.r5 += r.hit5;
    m.miou += r.iou;
  }
  m.r1 /= m.count;
  m.r5 /= m.count;
  m.miou /= m.count;
  return m;
}

inline MetricsReport aggregate(const std::vector<LabeledResult>& results) {
  std::map<std::string, std::vector<ExampleResult>> by_split;
  for (const auto& r : results) by_split[r.split].push_back(r.result);
  MetricsReport report;
  for (const auto& name : split_names()) {
    auto it = by_split.find(name);
    if (it == by_split.end() || it->second.empty()) continue;
    report.splits[name] = summarize(it->second);
  }
  for (const auto& [name, rs] : by_split)
    if (std::find(split_names().begin(), split_names().end(), name) == split_names().end())
      report.splits[name] = summarize(rs);
  if (report.splits.empty()) {
    report.warnings.push_back("no examples to aggregate");
    return report;
  }
  for (const auto& name : split_names())
    if (!report.splits.count(name)) report.warnings.push_back("split '" + name + "' is empty; excluded from average");
  for (const auto& [name, m] : report.splits) {
    report.average.count += m.count;
    report.average.r1 += m.r1;
    report.average.r5 += m.r5;
    report.average.miou += m.miou;
  }
  const double n = static_cast<double>(report.splits.size());
  report.average.r1 /= n;
  report.average.r5 /= n;
  report.average.miou /= n;
  return report;
}

// Always predicts the first segment: the canonical order is the ranking.
inline std::vector<Segment> prior_baseline(int num_clips) { return enumerate_segments(num_clips); }

struct BucketRecall {
  std::string bucket;
  std::size_t count = 0;
  double r1 = 0;
};

// Recall@1 over the whole set grouped by clause count (empty buckets omitted).
inline std::vector<BucketRecall> complexity_buckets(const std::vector<std::size_t>& clause_counts,
                                                    const std::vector<bool>& hit1) {
  if (clause_counts.size() != hit1.size()) throw std::invalid_argument("complexity_buckets: size mismatch");
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> acc;
  for (std::size_t i = 0; i < hit1.size(); ++i) {
    auto& [n, h] = acc[clause_counts[i]];
    ++n;
    h += hit1[i];
  }
  std::vector<BucketRecall> out;
  for (const auto& [c, nh] : acc)
    out.push_back({std::to_string(c), nh.first, static_cast<double>(nh.second) / nh.first});
  return out;
}

// Mean word vector of each query, using the embedding table values directly.
template <typename S>
std::vector<std::vector<double>> mean_embeddings(const EmbeddingTable<S>& table,
                                                 const std::vector<std::vector<std::string>>& queries) {
  std::vector<std::vector<double>> out;
  const auto& values = table.parameter().value;
  for (const auto& q : queries) {
    std::vector<double> m(table.dim(), 0.0);
    for (auto idx : table.indices(q))
      for (std::size_t j = 0; j < m.size(); ++j) m[j] += values(idx, j);
    for (auto& v : m) v /= std::max<std::size_t>(1, q.size());
    out.push_back(std::move(m));
  }
  return out;
}

// Distance from each test vector to its nearest training vector.
inline std::vector<double> nearest_distances(const std::vector<std::vector<double>>& test,
                                             const std::vector<std::vector<double>>& train) {
  if (train.empty()) throw std::invalid_argument("novelty: empty training set");
  std::vector<double> out;
  out.reserve(test.size());
  for (const auto& t : test) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : train) {
      double ss = 0;
      for (std::size_t j = 0; j < t.size(); ++j) ss += (t[j] - r[j]) * (t[j] - r[j]);
      best = std::min(best, ss);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

// Quartile bucket (0..3) of each distance. Edges are the 25/50/75th
// percentiles of the distances (linear interpolation); a value equal to an
// edge falls in the lower bucket.
inline std::vector<int> quartile_buckets(const std::vector<double>& distances) {
  std::vector<double> sorted = distances;
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double q) {
    if (sorted.size() == 1) return sorted.front();
    const double pos = q * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  };
  const std::array<double, 3> edges{pct(0.25), pct(0.5), pct(0.75)};
  std::vector<int> out;
  for (double d : distances) {
    int b = 0;
    while (b < 3 && d > edges[b]) ++b;
    out.push_back(b);
  }
  return out;
}

// Recall@1 per novelty quartile of the test queries.
inline std::vector<BucketRecall> novelty_buckets(const std::vector<std::vector<double>>& test_embeddings,
                                                 const std::vector<std::vector<double>>& train_embeddings,
                                                 const std::vector<bool>& hit1) {
  if (test_embeddings.size() != hit1.size()) throw std::invalid_argument("novelty_buckets: size mismatch");
  const auto dist = nearest_distances(test_embeddings, train_embeddings);
  const auto buckets = quartile_buckets(dist);
  std::array<std::pair<std::size_t, std::size_t>, 4> acc{};
  for (std::size_t i = 0; i < hit1.size(); ++i) {
    ++acc[buckets[i]].first;
    acc[buckets[i]].second += hit1[i];
  }
  std::vector<BucketRecall> out;
  for (int b = 0; b < 4; ++b)
    if (acc[b].first)
      out.push_back({"Q" + std::to_string(b + 1), acc[b].first, static_cast<double>(acc[b].second) / acc[b].first});
  return out;
}

}  // namespace ctg
