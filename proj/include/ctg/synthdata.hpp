#pragma once

// Procedural datasets of templated two-event queries.
//
// Each video plants concepts in disjoint clip spans (background clips are
// noise only). A query instantiates one template over the planted concepts:
//
//   before_xy  "X before Y"    X precedes Y      target X
//   before_yx  "Y , before X"  Y precedes X      target X
//   after_xy   "X after Y"     X follows Y       target X
//   after_yx   "Y , after X"   Y follows X       target X
//   then       "X then Y"      X precedes Y      target span from X to Y
//   base       "X"                               target X
//
// A concept phrase is "<noun> <verb>" and sits under its own S node, so the
// clause segmenter yields two sub-events for temporal templates and one for
// base queries.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctg/dataset.hpp"

namespace ctg {

enum class Template { before_xy, before_yx, after_xy, after_yx, then, base };

inline constexpr std::array<Template, 6> kTemplates{Template::before_xy, Template::before_yx, Template::after_xy,
                                                     Template::after_yx,  Template::then,      Template::base};

inline std::string to_string(Template t) {
  switch (t) {
    case Template::before_xy: return "before_xy";
    case Template::before_yx: return "before_yx";
    case Template::after_xy: return "after_xy";
    case Template::after_yx: return "after_yx";
    case Template::then: return "then";
    case Template::base: return "base";
  }
  return "?";
}

inline Template parse_template(const std::string& s) {
  for (auto t : kTemplates)
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown template '" + s + "'");
}

struct Concept {
  std::string name;  // noun token
  std::string verb;
  std::vector<double> vector;
};

struct Plant {
  int concept_id = 0;
  Segment span;
};

struct SynthConfig {
  int concepts = 20;
  int videos = 2400;
  int clips = 6;  // T
  std::size_t video_dim = 16;
  double noise = 0.05;  // sigma of the first modality
  double flow_noise = 0.05;
  bool flow_signal = true;  // false: second modality is noise only
  double min_concept_distance = 0.5;
  double train_fraction = 2000.0 / 2400.0;
  double val_fraction = 200.0 / 2400.0;
  double test_fraction = 200.0 / 2400.0;
  // Relative weights in kTemplates order.
  std::array<double, 6> template_mix{1, 1, 1, 1, 1, 1};
  // Plant the target concept twice, once on each side of the other concept.
  bool both_orders = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (concepts < 2) throw std::invalid_argument("synth: need at least two concepts");
    if (videos < 3) throw std::invalid_argument("synth: need at least three videos");
    if (clips < 2) throw std::invalid_argument("synth: clips per video must be >= 2");
    if (video_dim < 1) throw std::invalid_argument("synth: video_dim must be >= 1");
    if (noise < 0 || flow_noise < 0) throw std::invalid_argument("synth: noise must be >= 0");
    const double total = train_fraction + val_fraction + test_fraction;
    if (std::abs(total - 1.0) > 1e-9 || train_fraction < 0 || val_fraction < 0 || test_fraction < 0)
      throw std::invalid_argument("synth: split fractions must be non-negative and sum to 1");
    double mix = 0;
    for (double w : template_mix) {
      if (w < 0) throw std::invalid_argument("synth: template weights must be >= 0");
      mix += w;
    }
    if (!(mix > 0)) throw std::invalid_argument("synth: template mix is empty");
    if (both_orders && (template_mix[4] > 0 || template_mix[5] > 0))
      throw std::invalid_argument("synth: both_orders supports before/after templates only");
    const int need = both_orders ? 5 : 3;  // shortest spans plus one-clip buffers
    if (clips < need)
      throw std::invalid_argument("synth: " + std::to_string(clips) + " clips cannot hold the planted spans");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["concepts"] = concepts;
    j["videos"] = videos;
    j["clips"] = clips;
    j["video_dim"] = video_dim;
    j["noise"] = noise;
    j["flow_noise"] = flow_noise;
    j["flow_signal"] = flow_signal;
    j["min_concept_distance"] = min_concept_distance;
    j["train_fraction"] = train_fraction;
    j["val_fraction"] = val_fraction;
    j["test_fraction"] = test_fraction;
    j["template_mix"] = template_mix;
    j["both_orders"] = both_orders;
    j["seed"] = seed;
    return j;
  }

  static SynthConfig from_json(const nlohmann::json& j) {
    SynthConfig c;
    const auto known = c.to_json();
    for (const auto& [key, _] : j.items())
      if (!known.contains(key)) throw std::invalid_argument("synth config: unknown key '" + key + "'");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("concepts", c.concepts);
    get("videos", c.videos);
    get("clips", c.clips);
    get("video_dim", c.video_dim);
    get("noise", c.noise);
    get("flow_noise", c.flow_noise);
    get("flow_signal", c.flow_signal);
    get("min_concept_distance", c.min_concept_distance);
    get("train_fraction", c.train_fraction);
    get("val_fraction", c.val_fraction);
    get("test_fraction", c.test_fraction);
    get("template_mix", c.template_mix);
    get("both_orders", c.both_orders);
    get("seed", c.seed);
    c.validate();
    return c;
  }
};

// Generator-side facts about one query, enough to recompute its answer.
struct QueryMeta {
  Template tmpl = Template::base;
  int x = 0;  // target concept
  int y = -1;  // context concept, -1 for base queries
};

struct SynthVideo {
  std::string id;
  std::vector<Plant> plants;
  Tensor<float> rgb;
  Tensor<float> flow;
};

struct SynthDataset {
  SynthConfig config;
  std::vector<Concept> concepts;
  std::vector<SynthVideo> videos;
  std::vector<AnnotatedExample> train, val, test;
  std::map<std::string, QueryMeta> meta;  // by example id
  std::map<std::string, std::size_t> video_index;
};

namespace detail {

inline const std::vector<std::string>& synth_nouns() {
  static const std::vector<std::string> words{
      "dog",   "cat",    "man",   "woman", "child", "bird",  "horse",  "car",   "ball",  "boat",  "girl",  "boy",
      "baby",  "crowd",  "train", "kite",  "bike",  "cow",   "duck",   "fish",  "band",  "chef",  "guitar", "drone",
      "snake", "monkey", "truck", "plane", "goat",  "sheep", "player", "rider", "diver", "robot", "waiter", "clown"};
  return words;
}

inline const std::vector<std::string>& synth_verbs() {
  static const std::vector<std::string> words{
      "runs",   "jumps",  "sits",   "swims",  "falls",   "waves",  "spins", "stops",  "rolls",  "climbs",
      "dances", "sings",  "eats",   "sleeps", "turns",   "flies",  "walks", "laughs", "drinks", "kicks",
      "throws", "points", "crawls", "shakes", "appears", "leaves", "rests", "slides", "bounces", "floats",
      "waits",  "smiles", "cries",  "reads",  "writes",  "cooks"};
  return words;
}

inline std::string concept_tree(const Concept& c) {
  return "(S (NP (NN " + c.name + ")) (VP (VBZ " + c.verb + ")))";
}

// Tree text for a query; leaves read left to right give the tokens.
inline std::string query_tree(Template t, const Concept& x, const Concept* y) {
  switch (t) {
    case Template::before_xy: return "(S " + concept_tree(x) + " (SBAR (IN before) " + concept_tree(*y) + "))";
    case Template::after_xy: return "(S " + concept_tree(x) + " (SBAR (IN after) " + concept_tree(*y) + "))";
    case Template::before_yx:
      return "(S " + concept_tree(*y) + " (, ,) (SBAR (IN before) " + concept_tree(x) + "))";
    case Template::after_yx: return "(S " + concept_tree(*y) + " (, ,) (SBAR (IN after) " + concept_tree(x) + "))";
    case Template::then: return "(S " + concept_tree(x) + " (RB then) " + concept_tree(*y) + ")";
    case Template::base: return concept_tree(x);
  }
  return {};
}

// Whether the target X must come before (true) or after (false) Y.
inline bool target_precedes(Template t) {
  return t == Template::before_xy || t == Template::after_yx || t == Template::then;
}

// Uniform choice among all placements of spans with the given lengths, in
// order, separated by at least one clip.
template <typename Rng>
std::vector<Segment> place_spans(const std::vector<int>& lengths, int clips, Rng& rng) {
  std::vector<std::vector<Segment>> all;
  std::vector<Segment> cur;
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int from) {
    if (i == lengths.size()) {
      all.push_back(cur);
      return;
    }
    for (int s = from; s + lengths[i] <= clips; ++s) {
      cur.push_back({s, s + lengths[i] - 1});
      rec(i + 1, s + lengths[i] + 1);
      cur.pop_back();
    }
  };
  rec(0, 0);
  if (all.empty()) throw std::invalid_argument("synth: clips too few for the planted spans");
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
  return all[pick(rng)];
}

// Largest-remainder allocation of n items to weights.
inline std::vector<int> allocate(int n, const std::vector<double>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  std::vector<int> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = n * weights[i] / total;
    out[i] = static_cast<int>(std::floor(exact));
    used += out[i];
    rem.push_back({-(exact - out[i]), i});
  }
  std::sort(rem.begin(), rem.end());
  for (int k = 0; k < n - used; ++k) ++out[rem[static_cast<std::size_t>(k)].second];
  return out;
}

}  // namespace detail

// Recomputes the expected segment from planted spans and the template alone.
inline Segment oracle_ground(const QueryMeta& q, const std::vector<Plant>& plants) {
  std::vector<Segment> xs, ys;
  for (const auto& p : plants) {
    if (p.concept_id == q.x) xs.push_back(p.span);
    if (p.concept_id == q.y) ys.push_back(p.span);
  }
  if (xs.empty()) throw std::invalid_argument("oracle_ground: target concept not planted");
  if (q.tmpl == Template::base) return xs.front();
  if (ys.empty()) throw std::invalid_argument("oracle_ground: context concept not planted");
  const bool precedes = detail::target_precedes(q.tmpl);
  for (const auto& x : xs)
    for (const auto& y : ys) {
      if (precedes && x.end < y.start) return q.tmpl == Template::then ? Segment{x.start, y.end} : x;
      if (!precedes && x.start > y.end) return x;
    }
  throw std::invalid_argument("oracle_ground: no planted span satisfies the template");
}

// Builds everything in memory; write_synth() puts it on disk.
inline SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SynthDataset out;
  out.config = cfg;

  const auto& nouns = detail::synth_nouns();
  const auto& verbs = detail::synth_verbs();
  const auto nn = nouns.size(), nv = verbs.size();
  if (static_cast<std::size_t>(cfg.concepts) > nn * nv) throw std::invalid_argument("synth: too many concepts");
  for (int i = 0; i < cfg.concepts; ++i) {
    Concept c;
    const auto ui = static_cast<std::size_t>(i);
    c.name = nouns[ui % nn];
    c.verb = verbs[(ui + ui / nn) % nv];
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::invalid_argument("synth: cannot separate concepts at the requested distance");
      std::vector<double> v(cfg.video_dim);
      double norm = 0;
      for (auto& x : v) {
        x = gauss(rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (auto& x : v) x /= norm;
      bool ok = true;
      for (const auto& o : out.concepts) {
        double d = 0;
        for (std::size_t j = 0; j < v.size(); ++j) d += (v[j] - o.vector[j]) * (v[j] - o.vector[j]);
        ok = ok && std::sqrt(d) >= cfg.min_concept_distance;
      }
      if (ok) {
        c.vector = std::move(v);
        break;
      }
    }
    out.concepts.push_back(std::move(c));
  }

  // Exact template counts, shuffled over videos.
  const auto counts = detail::allocate(cfg.videos, std::vector<double>(cfg.template_mix.begin(), cfg.template_mix.end()));
  std::vector<Template> assignment;
  for (std::size_t i = 0; i < kTemplates.size(); ++i) assignment.insert(assignment.end(), counts[i], kTemplates[i]);
  std::shuffle(assignment.begin(), assignment.end(), rng);

  const int n_train = static_cast<int>(std::lround(cfg.videos * cfg.train_fraction));
  const int n_val = static_cast<int>(std::lround(cfg.videos * cfg.val_fraction));

  std::uniform_int_distribution<int> pick_concept(0, cfg.concepts - 1);
  std::uniform_int_distribution<int> pick_len(1, 2);
  std::bernoulli_distribution coin(0.5);
  char buf[32];
  for (int vi = 0; vi < cfg.videos; ++vi) {
    SynthVideo video;
    std::snprintf(buf, sizeof buf, "v%05d", vi);
    video.id = buf;
    const Template tmpl = assignment[static_cast<std::size_t>(vi)];

    const int a = pick_concept(rng);
    int b = pick_concept(rng);
    while (b == a) b = pick_concept(rng);

    QueryMeta q;
    q.tmpl = tmpl;
    if (cfg.both_orders) {
      // X, Y, X: the template decides which X occurrence is meant.
      std::vector<int> lens;
      for (int k = 0; k < 3; ++k) lens.push_back(pick_len(rng));
      while (lens[0] + lens[1] + lens[2] + 2 > cfg.clips) lens[std::max_element(lens.begin(), lens.end()) - lens.begin()] = 1;
      auto spans = detail::place_spans(lens, cfg.clips, rng);
      video.plants = {{a, spans[0]}, {b, spans[1]}, {a, spans[2]}};
      q.x = a;
      q.y = b;
    } else {
      std::vector<int> lens{pick_len(rng), pick_len(rng)};
      while (lens[0] + lens[1] + 1 > cfg.clips) lens[lens[0] >= lens[1] ? 0 : 1] = 1;
      auto spans = detail::place_spans(lens, cfg.clips, rng);
      video.plants = {{a, spans[0]}, {b, spans[1]}};  // a is the earlier concept
      if (tmpl == Template::base) {
        q.x = coin(rng) ? a : b;
      } else if (detail::target_precedes(tmpl)) {
        q.x = a;
        q.y = b;
      } else {
        q.x = b;
        q.y = a;
      }
    }

    video.rgb = Tensor<float>(static_cast<std::size_t>(cfg.clips), cfg.video_dim);
    video.flow = Tensor<float>(static_cast<std::size_t>(cfg.clips), cfg.video_dim);
    for (int t = 0; t < cfg.clips; ++t) {
      const Concept* c = nullptr;
      for (const auto& p : video.plants)
        if (p.span.start <= t && t <= p.span.end) c = &out.concepts[static_cast<std::size_t>(p.concept_id)];
      for (std::size_t j = 0; j < cfg.video_dim; ++j) {
        const double latent = c ? c->vector[j] : 0.0;
        video.rgb(static_cast<std::size_t>(t), j) = static_cast<float>(latent + cfg.noise * gauss(rng));
        video.flow(static_cast<std::size_t>(t), j) =
            static_cast<float>((cfg.flow_signal ? latent : 0.0) + cfg.flow_noise * gauss(rng));
      }
    }

    AnnotatedExample ex;
    std::snprintf(buf, sizeof buf, "q%05d", vi);
    ex.id = buf;
    ex.video_id = video.id;
    const auto& cx = out.concepts[static_cast<std::size_t>(q.x)];
    const Concept* cy = q.y >= 0 ? &out.concepts[static_cast<std::size_t>(q.y)] : nullptr;
    ex.ptb = detail::query_tree(tmpl, cx, cy);
    ex.tokens = tree_tokens(parse_ptb(*ex.ptb));
    ex.ground_truth = oracle_ground(q, video.plants);
    ex.annotations.assign(4, ex.ground_truth);
    ex.split = split_label(ex.tokens);
    ex.features = {{"rgb", "features/" + video.id + ".rgb.ctgf"}, {"flow", "features/" + video.id + ".flow.ctgf"}};

    out.meta[ex.id] = q;
    out.video_index[video.id] = out.videos.size();
    out.videos.push_back(std::move(video));
    auto& dst = vi < n_train ? out.train : vi < n_train + n_val ? out.val : out.test;
    dst.push_back(std::move(ex));
  }
  return out;
}

inline void write_synth(const SynthDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "features");
  for (const auto& v : ds.videos) {
    save_features_binary(ClipFeatures<float>{v.id, v.rgb}, (fs::path(dir) / "features" / (v.id + ".rgb.ctgf")).string());
    save_features_binary(ClipFeatures<float>{v.id, v.flow},
                         (fs::path(dir) / "features" / (v.id + ".flow.ctgf")).string());
  }
  write_dataset(ds.train, (fs::path(dir) / "train.jsonl").string());
  write_dataset(ds.val, (fs::path(dir) / "val.jsonl").string());
  write_dataset(ds.test, (fs::path(dir) / "test.jsonl").string());

  nlohmann::ordered_json m;
  m["generator_seed"] = ds.config.seed;
  m["config"] = ds.config.to_json();
  auto concepts = nlohmann::ordered_json::array();
  for (const auto& c : ds.concepts) concepts.push_back({{"name", c.name}, {"verb", c.verb}, {"vector", c.vector}});
  m["concepts"] = concepts;
  nlohmann::ordered_json videos;
  for (const auto& v : ds.videos) {
    auto plants = nlohmann::ordered_json::array();
    for (const auto& p : v.plants)
      plants.push_back({{"concept", p.concept_id}, {"span", {p.span.start, p.span.end}}});
    videos[v.id] = {{"num_clips", v.rgb.rows()}, {"plants", plants}};
  }
  m["videos"] = videos;
  nlohmann::ordered_json queries;
  for (const auto& [id, q] : ds.meta) queries[id] = {{"template", to_string(q.tmpl)}, {"x", q.x}, {"y", q.y}};
  m["queries"] = queries;
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw DataError("synth: cannot write manifest in " + dir);
  os << m.dump(1) << '\n';
}

// Manifest contents needed to re-derive answers without the dataset files.
struct SynthManifest {
  std::map<std::string, std::vector<Plant>> plants;  // by video id
  std::map<std::string, QueryMeta> queries;  // by example id
};

inline SynthManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("synth: cannot open manifest " + path);
  nlohmann::json m;
  in >> m;
  SynthManifest out;
  for (const auto& [vid, v] : m.at("videos").items()) {
    auto& ps = out.plants[vid];
    for (const auto& p : v.at("plants"))
      ps.push_back({p.at("concept").get<int>(), {p.at("span")[0].get<int>(), p.at("span")[1].get<int>()}});
  }
  for (const auto& [qid, q] : m.at("queries").items())
    out.queries[qid] = {parse_template(q.at("template").get<std::string>()), q.at("x").get<int>(), q.at("y").get<int>()};
  return out;
}

}  // namespace ctg
