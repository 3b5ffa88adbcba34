#pragma once

// Maps externally supplied annotation files onto the dataset schema.
//
// Input: JSON Lines (or a single JSON array) of
//   {"id": "...",                   optional, defaults to "<video>#<line>"
//    "description": "the man waves before he falls",
//    "tokens": [...],               optional, whitespace split of description otherwise
//    "video": "video_id",
//    "times": [[s, e], ...],        inclusive clip indices, or
//    "times_seconds": [[s, e], ...] seconds, mapped onto 5-second clips
//    "parse": "(S ...)"}            optional bracketed tree
//
// Feature files are looked up as <features_dir>/<video>.<modality>.ctgf,
// falling back to .json.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctg/dataset.hpp"

namespace ctg {

inline constexpr double kClipSeconds = 5.0;

// Seconds [start, end) onto inclusive clip indices.
inline Segment seconds_to_clips(double start, double end) {
  const int s = static_cast<int>(std::floor(start / kClipSeconds));
  const int e = std::max(s, static_cast<int>(std::ceil(end / kClipSeconds)) - 1);
  return {s, e};
}

struct AdaptOptions {
  std::vector<std::string> modalities{"rgb", "flow"};
};

struct AdaptSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<nlohmann::json> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("adapt: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<nlohmann::json> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    for (auto& r : nlohmann::json::parse(text)) out.push_back(r);
    return out;
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(nlohmann::json::parse(line));
  return out;
}

inline std::string find_feature_file(const std::filesystem::path& dir, const std::string& video,
                                     const std::string& modality) {
  for (const char* ext : {".ctgf", ".json"}) {
    auto p = dir / (video + "." + modality + ext);
    if (std::filesystem::exists(p)) return p.string();
  }
  return {};
}

}  // namespace detail

// Writes a dataset file at out_path. Records whose spans fall outside the
// video are skipped and counted.
inline AdaptSummary adapt(const std::string& annotations_path, const std::string& features_dir,
                          const std::string& out_path, const AdaptOptions& opts = {}) {
  namespace fs = std::filesystem;
  const auto out_dir = fs::absolute(fs::path(out_path)).parent_path();
  AdaptSummary summary;
  std::vector<AnnotatedExample> examples;
  std::map<std::string, int> clip_counts;

  std::vector<nlohmann::json> records;
  try {
    records = detail::read_records(annotations_path);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("adapt: malformed JSON in " + annotations_path + ": " + e.what());
  }
  std::size_t line = 0;
  for (const auto& r : records) {
    ++line;
    AnnotatedExample ex;
    try {
      ex.video_id = r.at("video").get<std::string>();
      ex.id = r.contains("id") ? r.at("id").get<std::string>() : ex.video_id + "#" + std::to_string(line);
      if (r.contains("tokens")) {
        ex.tokens = r.at("tokens").get<std::vector<std::string>>();
      } else {
        std::istringstream ws(r.at("description").get<std::string>());
        for (std::string tok; ws >> tok;) ex.tokens.push_back(tok);
      }
      if (r.contains("times")) {
        for (const auto& t : r.at("times")) ex.annotations.push_back(segment_from_json(t));
      } else {
        for (const auto& t : r.at("times_seconds"))
          ex.annotations.push_back(seconds_to_clips(t.at(0).get<double>(), t.at(1).get<double>()));
      }
      if (r.contains("parse")) ex.ptb = r.at("parse").get<std::string>();
    } catch (const std::exception& e) {
      summary.warnings.push_back("record " + std::to_string(line) + ": " + e.what() + "; skipped");
      ++summary.skipped;
      continue;
    }
    if (ex.tokens.empty() || ex.annotations.empty()) {
      summary.warnings.push_back("record " + ex.id + ": no tokens or no annotator spans; skipped");
      ++summary.skipped;
      continue;
    }

    bool ok = true;
    for (const auto& m : opts.modalities) {
      const auto f = detail::find_feature_file(features_dir, ex.video_id, m);
      if (f.empty()) {
        summary.warnings.push_back("record " + ex.id + ": no " + m + " features for video " + ex.video_id + "; skipped");
        ok = false;
        break;
      }
      ex.features[m] = fs::relative(fs::absolute(f), out_dir).string();
      if (!clip_counts.count(ex.video_id)) clip_counts[ex.video_id] = load_features<float>(f, ex.video_id).num_clips();
    }
    if (!ok) {
      ++summary.skipped;
      continue;
    }
    const int t = clip_counts.at(ex.video_id);
    for (const auto& a : ex.annotations)
      ok = ok && a.valid_for(t);
    if (!ok) {
      summary.warnings.push_back("record " + ex.id + ": annotator span outside the video's " + std::to_string(t) +
                                 " clips; skipped");
      ++summary.skipped;
      continue;
    }
    if (ex.ptb) {
      try {
        if (tree_tokens(parse_ptb(*ex.ptb)).size() != ex.tokens.size())
          throw DataError("tree leaves do not match tokens");
      } catch (const std::exception& e) {
        summary.warnings.push_back("record " + ex.id + ": " + e.what() + "; parse dropped");
        ex.ptb.reset();
      }
    }
    ex.ground_truth = majority_segment(ex.annotations);
    ex.split = split_label(ex.tokens);
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw DataError("adapt: no valid records in " + annotations_path);
  fs::create_directories(out_dir);
  write_dataset(examples, out_path);
  summary.written = examples.size();
  return summary;
}

}  // namespace ctg
