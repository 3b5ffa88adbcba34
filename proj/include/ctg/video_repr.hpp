#pragma once

// Candidate segment enumeration, segment features (local + global pooling
// and temporal end-point features), the segment embedding MLP, and the clip
// feature file formats.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ctg/checkpoint.hpp"
#include "ctg/nn.hpp"

namespace ctg {

// Inclusive clip span.
struct Segment {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool valid_for(int num_clips) const { return 0 <= start && start <= end && end < num_clips; }
  auto operator<=>(const Segment&) const = default;
};

inline std::string to_string(const Segment& s) {
  return "(" + std::to_string(s.start) + "," + std::to_string(s.end) + ")";
}

// All contiguous spans ordered by start, then end: T(T+1)/2 of them.
inline std::vector<Segment> enumerate_segments(int num_clips) {
  if (num_clips < 1) throw std::invalid_argument("enumerate_segments: need at least one clip");
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>(num_clips) * (num_clips + 1) / 2);
  for (int s = 0; s < num_clips; ++s)
    for (int e = s; e < num_clips; ++e) out.push_back({s, e});
  return out;
}

// Position of a segment in the canonical enumeration.
inline std::size_t segment_index(const Segment& seg, int num_clips) {
  if (!seg.valid_for(num_clips))
    throw std::out_of_range("segment " + to_string(seg) + " invalid for " + std::to_string(num_clips) + " clips");
  const std::size_t s = seg.start, t = num_clips;
  return s * t - s * (s - 1) / 2 + static_cast<std::size_t>(seg.end - seg.start);
}

template <typename S>
struct ClipFeatures {
  std::string video_id;
  Tensor<S> rows;  // T x D

  int num_clips() const { return static_cast<int>(rows.rows()); }
  std::size_t dim() const { return rows.cols(); }
};

// [mean of clips s..e | mean of all clips | s/T | (e+1)/T]
template <typename S>
std::vector<S> segment_features(const ClipFeatures<S>& clips, const Segment& seg) {
  const int t = clips.num_clips();
  if (!seg.valid_for(t))
    throw std::out_of_range("segment_features: " + to_string(seg) + " invalid for " + std::to_string(t) + " clips");
  const std::size_t d = clips.dim();
  std::vector<S> out(2 * d + 2, S(0));
  for (int r = seg.start; r <= seg.end; ++r)
    for (std::size_t j = 0; j < d; ++j) out[j] += clips.rows(r, j);
  for (int r = 0; r < t; ++r)
    for (std::size_t j = 0; j < d; ++j) out[d + j] += clips.rows(r, j);
  for (std::size_t j = 0; j < d; ++j) {
    out[j] /= static_cast<S>(seg.length());
    out[d + j] /= static_cast<S>(t);
  }
  out[2 * d] = static_cast<S>(seg.start) / static_cast<S>(t);
  out[2 * d + 1] = static_cast<S>(seg.end + 1) / static_cast<S>(t);
  return out;
}

// One row of segment_features per segment.
template <typename S>
Tensor<S> segment_feature_matrix(const ClipFeatures<S>& clips, const std::vector<Segment>& segments) {
  const std::size_t width = 2 * clips.dim() + 2;
  std::vector<S> data;
  data.reserve(segments.size() * width);
  for (const auto& seg : segments) {
    auto row = segment_features(clips, seg);
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor<S>({segments.size(), width}, std::move(data));
}

// v_t = W2 relu(W1 x + b1) + b2, no output normalization.
template <typename S>
class SegmentEmbedder {
 public:
  SegmentEmbedder() = default;
  template <typename Rng>
  SegmentEmbedder(ParameterStore<S>& store, std::size_t video_dim, std::size_t hidden, std::size_t embed_dim,
                  Rng& rng)
      : video_dim_(video_dim), mlp_(store, "segment_mlp", 2 * video_dim + 2, hidden, embed_dim, rng) {}

  std::size_t video_dim() const { return video_dim_; }
  std::size_t embed_dim() const { return mlp_.output.out_dim(); }

  Var<S> embed(Tape<S>& tape, Var<S> features) const {
    if (features.cols() != 2 * video_dim_ + 2)
      throw ShapeError("embed_segment: feature width " + std::to_string(features.cols()) + " does not match 2*" +
                       std::to_string(video_dim_) + "+2");
    return mlp_(tape, features);
  }

  Mlp2<S>& mlp() { return mlp_; }

 private:
  std::size_t video_dim_ = 0;
  Mlp2<S> mlp_;
};

// ---------------------------------------------------------------------------
// Feature files.
//
// JSON:   {"video_id": "...", "num_clips": T, "dim": D, "rows": [[...], ...]}
// Binary: "CTGF", u32 version = 1, u32 T, u32 D, then T*D little-endian
//         float32 values, row-major.

template <typename S>
ClipFeatures<S> load_features_binary(const std::string& path, const std::string& video_id) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("features: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "CTGF", 4) != 0) throw DataError("features: bad magic in " + path);
  if (detail::get_u32(is, path) != 1) throw DataError("features: unsupported version in " + path);
  const auto t = detail::get_u32(is, path);
  const auto d = detail::get_u32(is, path);
  if (t == 0 || d == 0) throw DataError("features: empty matrix in " + path);
  std::vector<float> raw(static_cast<std::size_t>(t) * d);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float))))
    throw DataError("features: " + path + " is shorter than " + std::to_string(t) + "x" + std::to_string(d));
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("features: trailing bytes in " + path);
  for (float v : raw)
    if (!std::isfinite(v)) throw DataError("features: non-finite value in " + path);
  return {video_id, Tensor<S>({t, d}, std::vector<S>(raw.begin(), raw.end()))};
}

template <typename S>
void save_features_binary(const ClipFeatures<S>& clips, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("features: cannot open " + path + " for writing");
  os.write("CTGF", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<std::uint32_t>(clips.rows.rows()));
  detail::put_u32(os, static_cast<std::uint32_t>(clips.rows.cols()));
  std::vector<float> raw(clips.rows.data().begin(), clips.rows.data().end());
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!os) throw DataError("features: write failed for " + path);
}

template <typename S>
ClipFeatures<S> load_features_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("features: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
    const auto t = j.at("num_clips").get<std::size_t>();
    const auto d = j.at("dim").get<std::size_t>();
    const auto& rows = j.at("rows");
    if (t == 0 || d == 0) throw DataError("features: empty matrix in " + path);
    if (rows.size() != t) throw DataError("features: " + path + " declares " + std::to_string(t) + " clips");
    std::vector<S> data;
    data.reserve(t * d);
    for (const auto& r : rows) {
      if (r.size() != d) throw DataError("features: row width mismatch in " + path);
      for (const auto& v : r) {
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw DataError("features: non-finite value in " + path);
        data.push_back(static_cast<S>(x));
      }
    }
    return {j.at("video_id").get<std::string>(), Tensor<S>({t, d}, std::move(data))};
  } catch (const nlohmann::json::exception& e) {
    throw DataError("features: malformed JSON in " + path + ": " + e.what());
  }
}

template <typename S>
void save_features_json(const ClipFeatures<S>& clips, const std::string& path) {
  nlohmann::json j;
  j["video_id"] = clips.video_id;
  j["num_clips"] = clips.rows.rows();
  j["dim"] = clips.rows.cols();
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < clips.rows.rows(); ++r)
    rows.push_back(std::vector<double>(clips.rows.row_ptr(r), clips.rows.row_ptr(r) + clips.rows.cols()));
  j["rows"] = rows;
  std::ofstream os(path);
  if (!os) throw DataError("features: cannot open " + path + " for writing");
  os << j.dump() << '\n';
}

// Chooses the decoder by extension: ".json" is JSON, anything else binary.
template <typename S>
ClipFeatures<S> load_features(const std::string& path, const std::string& video_id) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    auto f = load_features_json<S>(path);
    if (f.video_id != video_id)
      throw DataError("features: " + path + " belongs to video " + f.video_id + ", expected " + video_id);
    return f;
  }
  return load_features_binary<S>(path, video_id);
}

}  // namespace ctg
