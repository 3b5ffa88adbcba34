#pragma once

// Scoring whole datasets and turning rankings into metrics.

#include <string>
#include <vector>

#include "ctg/dataset.hpp"
#include "ctg/eval.hpp"
#include "ctg/model.hpp"

namespace ctg {

// Refined scores of every candidate segment, in canonical segment order.
struct Prediction {
  std::string id;
  std::vector<Segment> segments;
  std::vector<double> scores;

  std::vector<Segment> ranking() const { return rank_segments(scores, segments); }
};

template <typename S>
std::vector<Prediction> predict(const CtgNet<S>& model, const Dataset<S>& ds) {
  std::vector<Prediction> out;
  out.reserve(ds.examples.size());
  for (const auto& ex : ds.examples) {
    const auto& v = ds.video(ex.video_id);
    auto table = model.evaluate(ex.query(), v.segment_features, v.segments);
    out.push_back({ex.id, v.segments, std::vector<double>(table.refined.begin(), table.refined.end())});
  }
  return out;
}

inline std::vector<Prediction> fuse_predictions(const std::vector<Prediction>& rgb, const std::vector<Prediction>& flow,
                                                double lambda_rgb) {
  if (rgb.size() != flow.size()) throw std::invalid_argument("late_fusion: prediction count mismatch");
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    if (rgb[i].id != flow[i].id || rgb[i].segments != flow[i].segments)
      throw std::invalid_argument("late_fusion: predictions for " + rgb[i].id + " do not align");
    out.push_back({rgb[i].id, rgb[i].segments, late_fusion(rgb[i].scores, flow[i].scores, lambda_rgb)});
  }
  return out;
}

// Predictions must be in dataset order.
inline std::vector<ExampleResult> example_results(const std::vector<Prediction>& preds,
                                                  const std::vector<AnnotatedExample>& examples) {
  if (preds.size() != examples.size()) throw std::invalid_argument("metrics: prediction count mismatch");
  std::vector<ExampleResult> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].id != examples[i].id)
      throw std::invalid_argument("metrics: prediction " + preds[i].id + " does not match record " + examples[i].id);
    out.push_back(example_metrics(preds[i].ranking(), examples[i].annotations));
  }
  return out;
}

inline MetricsReport metrics_report(const std::vector<ExampleResult>& results,
                                    const std::vector<AnnotatedExample>& examples) {
  std::vector<LabeledResult> labeled;
  for (std::size_t i = 0; i < results.size(); ++i) labeled.push_back({examples[i].split, results[i]});
  return aggregate(labeled);
}

inline MetricsReport metrics_report(const std::vector<Prediction>& preds, const std::vector<AnnotatedExample>& examples) {
  return metrics_report(example_results(preds, examples), examples);
}

// Prior baseline predictions: score = canonical index, so (0,0) ranks first.
template <typename S>
std::vector<Prediction> prior_predictions(const Dataset<S>& ds) {
  std::vector<Prediction> out;
  for (const auto& ex : ds.examples) {
    const auto segs = prior_baseline(ds.video(ex.video_id).clips.num_clips());
    std::vector<double> scores(segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) scores[i] = static_cast<double>(i);
    out.push_back({ex.id, segs, scores});
  }
  return out;
}

}  // namespace ctg
