#pragma once

// Dataset files: JSON Lines, one annotated query per line.
//
//   {"id": "q17", "video": "v0042", "tokens": ["the", "man", ...],
//    "ptb": "(S ...)",                         optional
//    "annotations": [[s, e], [s, e], [s, e], [s, e]],
//    "ground_truth": [s, e],                   optional, majority rule when absent
//    "split": "before",                        optional, derived from tokens when absent
//    "features": {"rgb": "features/v0042.rgb.ctgf", "flow": "..."}}
//
// Feature paths are relative to the dataset file's directory.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctg/clause_seg.hpp"
#include "ctg/eval.hpp"
#include "ctg/model.hpp"

namespace ctg {

struct AnnotatedExample {
  std::string id;
  std::string video_id;
  std::vector<std::string> tokens;
  std::optional<std::string> ptb;
  std::vector<Segment> annotations;
  Segment ground_truth;
  std::string split;
  std::map<std::string, std::string> features;  // modality -> path as written in the file

  // Derived at load time.
  std::optional<SubEventMasks> clause_masks;
  std::optional<std::size_t> clause_count;

  QueryInput query() const { return {tokens, clause_masks}; }
};

// The segment picked by most annotators; ties go to the earliest in canonical order.
inline Segment majority_segment(const std::vector<Segment>& annotations) {
  if (annotations.empty()) throw std::invalid_argument("majority_segment: no annotations");
  std::map<Segment, int> votes;
  for (const auto& a : annotations) ++votes[a];
  Segment best = votes.begin()->first;
  int best_votes = 0;
  for (const auto& [seg, n] : votes)  // std::map iterates in canonical order
    if (n > best_votes) {
      best = seg;
      best_votes = n;
    }
  return best;
}

inline nlohmann::json segment_json(const Segment& s) { return nlohmann::json::array({s.start, s.end}); }

inline Segment segment_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("segment must be [start, end]");
  return {j[0].get<int>(), j[1].get<int>()};
}

inline nlohmann::ordered_json example_to_json(const AnnotatedExample& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["video"] = ex.video_id;
  j["tokens"] = ex.tokens;
  if (ex.ptb) j["ptb"] = *ex.ptb;
  auto ann = nlohmann::json::array();
  for (const auto& a : ex.annotations) ann.push_back(segment_json(a));
  j["annotations"] = ann;
  j["ground_truth"] = segment_json(ex.ground_truth);
  j["split"] = ex.split;
  j["features"] = ex.features;
  return j;
}

// Parses one record without touching feature files.
inline AnnotatedExample example_from_json(const nlohmann::json& j) {
  AnnotatedExample ex;
  ex.id = j.at("id").get<std::string>();
  try {
    ex.video_id = j.at("video").get<std::string>();
    ex.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (ex.tokens.empty()) throw DataError("empty token list");
    if (j.contains("ptb") && !j.at("ptb").is_null()) ex.ptb = j.at("ptb").get<std::string>();
    for (const auto& a : j.at("annotations")) ex.annotations.push_back(segment_from_json(a));
    if (ex.annotations.empty()) throw DataError("no annotations");
    ex.ground_truth =
        j.contains("ground_truth") ? segment_from_json(j.at("ground_truth")) : majority_segment(ex.annotations);
    ex.split = j.contains("split") ? j.at("split").get<std::string>() : split_label(ex.tokens);
    if (j.contains("features")) ex.features = j.at("features").get<std::map<std::string, std::string>>();
  } catch (const DataError& e) {
    throw DataError("record " + ex.id + ": " + e.what());
  } catch (const std::exception& e) {
    throw DataError("record " + ex.id + ": " + e.what());
  }
  return ex;
}

template <typename S>
struct VideoData {
  ClipFeatures<S> clips;
  std::vector<Segment> segments;  // canonical order
  Tensor<S> segment_features;  // one row per segment
};

template <typename S>
struct Dataset {
  std::vector<AnnotatedExample> examples;
  std::map<std::string, std::shared_ptr<const VideoData<S>>> videos;
  std::vector<std::string> warnings;
  std::string modality;

  const VideoData<S>& video(const std::string& id) const {
    auto it = videos.find(id);
    if (it == videos.end()) throw DataError("dataset: unknown video " + id);
    return *it->second;
  }
  std::vector<std::string> video_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : videos) out.push_back(id);
    return out;
  }
};

struct LoadOptions {
  std::string modality = "rgb";
  bool require_tree = false;  // parser mode
  bool load_features = true;
};

// Reads and validates a dataset file. Errors name the offending record.
template <typename S>
Dataset<S> load_dataset(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw DataError("dataset: cannot open " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  Dataset<S> ds;
  ds.modality = opts.modality;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset: " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("id")) throw DataError("dataset: " + path + ":" + std::to_string(lineno) + ": record without id");
    auto ex = example_from_json(j);

    if (ex.ptb) {
      try {
        auto tree = parse_ptb(*ex.ptb);
        if (tree_tokens(tree).size() != ex.tokens.size())
          throw DataError("record " + ex.id + ": tree leaves do not match tokens");
        ex.clause_masks = segment_clauses(tree);
        ex.clause_count = count_clauses(tree);
      } catch (const ParseError& e) {
        throw DataError("record " + ex.id + ": " + e.what());
      }
    } else if (opts.require_tree) {
      throw DataError("record " + ex.id + ": parser mode requires a ptb tree");
    }
    if (split_is_ambiguous(ex.tokens))
      ds.warnings.push_back("record " + ex.id + ": several temporal words; split '" + ex.split +
                            "' chosen by priority order");

    if (opts.load_features && !ds.videos.count(ex.video_id)) {
      auto it = ex.features.find(opts.modality);
      if (it == ex.features.end()) throw DataError("record " + ex.id + ": no '" + opts.modality + "' feature file");
      const auto fpath = (dir / it->second).string();
      if (!std::filesystem::exists(fpath)) throw DataError("record " + ex.id + ": missing feature file " + fpath);
      auto v = std::make_shared<VideoData<S>>();
      try {
        v->clips = load_features<S>(fpath, ex.video_id);
      } catch (const DataError& e) {
        throw DataError("record " + ex.id + ": " + e.what());
      }
      v->segments = enumerate_segments(v->clips.num_clips());
      v->segment_features = segment_feature_matrix(v->clips, v->segments);
      ds.videos[ex.video_id] = std::move(v);
    }
    if (opts.load_features) {
      const int t = ds.videos.at(ex.video_id)->clips.num_clips();
      for (const auto& a : ex.annotations)
        if (!a.valid_for(t))
          throw DataError("record " + ex.id + ": annotation " + to_string(a) + " invalid for " + std::to_string(t) +
                          " clips");
      if (!ex.ground_truth.valid_for(t))
        throw DataError("record " + ex.id + ": ground truth " + to_string(ex.ground_truth) + " invalid for " +
                        std::to_string(t) + " clips");
    }
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty()) throw DataError("dataset: " + path + " has no records");
  return ds;
}

inline void write_dataset(const std::vector<AnnotatedExample>& examples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("dataset: cannot open " + path + " for writing");
  for (const auto& ex : examples) out << example_to_json(ex).dump() << '\n';
}

}  // namespace ctg
