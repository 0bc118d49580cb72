#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "flat_index.hpp"

/**
 * @file classify.hpp
 *
 * @brief Species predictions from retrieval results or prediction files, and the detection router.
 */

namespace trapdex {

enum class MatchMode { knn, centroid };

inline std::string_view to_string(MatchMode m) { return m == MatchMode::knn ? "knn" : "centroid"; }

inline std::optional<MatchMode> parse_match_mode(std::string_view s) {
  if (s == "knn") return MatchMode::knn;
  if (s == "centroid") return MatchMode::centroid;
  return std::nullopt;
}

struct MatchingConfig {
  Metric metric = Metric::l2;
  MatchMode mode = MatchMode::knn;
  /// Ignored in centroid mode.
  std::size_t k = 1;
};

struct RankedLabel {
  LabelId label = 0;
  /// k-NN: score of the class's best neighbor. Centroid: score against the class centroid.
  double score = 0;

  bool operator==(const RankedLabel&) const = default;
};

using Ranking = std::vector<RankedLabel>;

/**
 * Class ranking among the first k neighbors: more votes first, then the better best-neighbor
 * score, then the smaller label id. Neighbors must be sorted best-first.
 */
inline Ranking knn_vote(std::span<const Neighbor> neighbors, std::size_t k) {
  if (neighbors.empty()) throw Error("knn_vote needs at least one neighbor");
  if (k == 0) throw ValidationError("k must be at least 1");
  struct Tally {
    std::size_t votes = 0;
    std::size_t first = 0;
    double best = 0;
  };
  std::map<LabelId, Tally> tally;
  const std::size_t n = std::min(k, neighbors.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = neighbors[i];
    if (!nb.label) throw Error("neighbor '" + nb.id + "' has no label");
    auto [it, fresh] = tally.try_emplace(*nb.label);
    if (fresh) {
      it->second.first = i;
      it->second.best = nb.score;
    }
    ++it->second.votes;
  }
  std::vector<std::pair<LabelId, Tally>> entries(tally.begin(), tally.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second.votes != b.second.votes) return a.second.votes > b.second.votes;
    // Neighbors arrive best-first, so an earlier first position means a better best score.
    if (a.second.best != b.second.best) return a.second.first < b.second.first;
    return a.first < b.first;
  });
  Ranking out;
  out.reserve(entries.size());
  for (const auto& [label, t] : entries) out.push_back({label, t.best});
  return out;
}

/// All classes ranked by score against their centroid; equal scores fall back to label id.
inline Ranking centroid_classify(const CentroidSet& centroids, std::span<const float> query, Metric metric) {
  if (centroids.size() == 0) throw Error("no centroids");
  if (query.size() != centroids.dimension)
    throw Error("query dimension " + std::to_string(query.size()) + " does not match centroid dimension " +
                std::to_string(centroids.dimension));
  double qn = 1;
  if (metric == Metric::cosine) {
    qn = norm(query);
    if (!(qn > 0)) throw Error("zero-norm query under cosine");
  }
  Ranking out;
  out.reserve(centroids.size());
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const std::span<const double> cen = centroids.centroids[c];
    double s;
    if (metric == Metric::l2) {
      s = squared_l2(cen, query);
    } else {
      const double cn = norm(cen);
      if (!(cn > 0)) throw Error("zero-norm centroid for label " + std::to_string(centroids.labels[c]));
      s = dot(cen, query) / (cn * qn);
    }
    out.push_back({centroids.labels[c], s});
  }
  std::sort(out.begin(), out.end(), [metric](const RankedLabel& a, const RankedLabel& b) {
    if (a.score != b.score) return better(metric, a.score, b.score);
    return a.label < b.label;
  });
  return out;
}

/**
 * Stands in for a trained classifier: a table of rankings keyed by (image_id, variant).
 * Filled from a prediction file, from retrieval, or directly by tests.
 */
class ScoreProvider {
 public:
  void add(std::string image_id, Variant variant, Ranking ranking) {
    if (ranking.empty()) throw Error("empty ranking for '" + image_id + "'");
    auto key = make_key(image_id, variant);
    if (!table_.emplace(std::move(key), std::move(ranking)).second)
      throw Error("duplicate prediction for (" + image_id + ", " + std::string(to_string(variant)) + ")");
  }

  const Ranking* find(std::string_view image_id, Variant variant) const {
    auto it = table_.find(make_key(image_id, variant));
    return it == table_.end() ? nullptr : &it->second;
  }

  bool covers(std::string_view image_id, Variant variant) const { return find(image_id, variant) != nullptr; }
  std::size_t size() const { return table_.size(); }

  void merge(const ScoreProvider& other) {
    for (const auto& [k, v] : other.table_)
      if (!table_.emplace(k, v).second) throw Error("duplicate prediction key while merging providers");
  }

 private:
  static std::string make_key(std::string_view id, Variant v) {
    std::string k(to_string(v));
    k += '\x1f';
    k += id;
    return k;
  }

  std::unordered_map<std::string, Ranking> table_;
};

/// Wraps an index (k-NN) or a centroid set for retrieval classification.
struct RetrievalDatabase {
  const FlatIndex* index = nullptr;
  const CentroidSet* centroids = nullptr;
};

/// Classifies every query row against the database; the result covers (id, queries.variant()) for each row.
inline ScoreProvider retrieval_provider(const RetrievalDatabase& db, const EmbeddingMatrix& queries,
                                        const MatchingConfig& cfg, unsigned threads = 1) {
  ScoreProvider out;
  if (cfg.mode == MatchMode::knn) {
    if (!db.index) throw ValidationError("k-NN matching needs a flat index");
    if (cfg.k == 0) throw ValidationError("k must be at least 1");
    if (db.index->metric() != cfg.metric) throw ValidationError("index metric does not match the matching config");
    if (db.index->size() == 0) throw Error("retrieval database is empty");
    const auto results = search_batch(*db.index, queries, cfg.k, threads);
    for (std::size_t q = 0; q < queries.size(); ++q) out.add(queries.id(q), queries.variant(), knn_vote(results[q], cfg.k));
  } else {
    if (!db.centroids) throw ValidationError("centroid matching needs a centroid set");
    for (std::size_t q = 0; q < queries.size(); ++q)
      out.add(queries.id(q), queries.variant(), centroid_classify(*db.centroids, queries.row(q), cfg.metric));
  }
  return out;
}

enum class EmptyStrategy { declare_empty, second_classifier };
enum class Arrangement { single_shared, two_separate };
enum class Provenance { crop_classifier, full_classifier, empty_rule };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::crop_classifier: return "crop_classifier";
    case Provenance::full_classifier: return "full_classifier";
    case Provenance::empty_rule: return "empty_rule";
  }
  return "crop_classifier";
}

struct RouterConfig {
  EmptyStrategy empty_strategy = EmptyStrategy::second_classifier;
  Arrangement arrangement = Arrangement::two_separate;
  double conf_threshold = 0.2;
  /// Variant the crop classifier is queried with (cropped or segmented).
  Variant crop_variant = Variant::cropped;
  /// Label emitted by the empty rule.
  LabelId empty_label = kEmptyLabel;
};

struct Prediction {
  std::string image_id;
  Ranking ranking;
  Provenance provenance = Provenance::crop_classifier;
  Variant variant = Variant::cropped;

  LabelId head() const { return ranking.front().label; }
};

/**
 * Detection present: crop classifier. No detection: the empty rule or the full-image classifier.
 * With a single shared classifier, the crop provider also serves full-image lookups.
 */
inline Prediction route_and_classify(std::string_view image_id, const std::optional<DetectionRecord>& primary_det,
                                     const ScoreProvider& crop_provider, const ScoreProvider* full_provider,
                                     const RouterConfig& cfg) {
  Prediction p;
  p.image_id = std::string(image_id);
  if (primary_det) {
    const Ranking* r = crop_provider.find(image_id, cfg.crop_variant);
    if (!r)
      throw Error("crop classifier has no prediction for (" + p.image_id + ", " +
                  std::string(to_string(cfg.crop_variant)) + ")");
    p.ranking = *r;
    p.provenance = Provenance::crop_classifier;
    p.variant = cfg.crop_variant;
    return p;
  }
  if (cfg.empty_strategy == EmptyStrategy::declare_empty) {
    p.ranking = {{cfg.empty_label, 1.0}};
    p.provenance = Provenance::empty_rule;
    p.variant = Variant::full;
    return p;
  }
  const ScoreProvider* provider = cfg.arrangement == Arrangement::single_shared ? &crop_provider : full_provider;
  if (!provider) throw ValidationError("the second-classifier strategy needs a full-image classifier");
  const Ranking* r = provider->find(image_id, Variant::full);
  if (!r) throw Error("full-image classifier has no prediction for (" + p.image_id + ", full)");
  p.ranking = *r;
  p.provenance = Provenance::full_classifier;
  p.variant = Variant::full;
  return p;
}

inline Prediction route_and_classify(const ImageRecord& image, const std::optional<DetectionRecord>& primary_det,
                                     const ScoreProvider& crop_provider, const ScoreProvider* full_provider,
                                     const RouterConfig& cfg) {
  return route_and_classify(image.image_id, primary_det, crop_provider, full_provider, cfg);
}

namespace predictions {

/// One prediction-file line: `{"image_id", "variant", "ranking": [{"label", "score"}, ...]}`.
inline std::string to_jsonl(std::string_view image_id, Variant variant, const Ranking& ranking,
                            std::optional<Provenance> provenance = std::nullopt) {
  nlohmann::ordered_json j;
  j["image_id"] = image_id;
  j["variant"] = to_string(variant);
  j["ranking"] = nlohmann::ordered_json::array();
  for (const auto& r : ranking) j["ranking"].push_back({{"label", r.label}, {"score", r.score}});
  if (provenance) j["provenance"] = to_string(*provenance);
  return j.dump();
}

struct Entry {
  std::string image_id;
  Variant variant = Variant::full;
  Ranking ranking;
  std::optional<Provenance> provenance;
};

inline std::vector<Entry> parse_jsonl(std::string_view text, std::string_view source = "<predictions>") {
  std::vector<Entry> out;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto at = std::string(source) + " line " + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      Entry e;
      e.image_id = j.at("image_id").get<std::string>();
      const auto v = parse_variant(j.at("variant").get<std::string>());
      if (!v) throw Error(at + ": unknown variant");
      e.variant = *v;
      for (const auto& r : j.at("ranking")) e.ranking.push_back({r.at("label").get<LabelId>(), r.value("score", 0.0)});
      if (e.ranking.empty()) throw Error(at + ": empty ranking");
      if (j.contains("provenance")) {
        const auto p = j.at("provenance").get<std::string>();
        if (p == "crop_classifier") e.provenance = Provenance::crop_classifier;
        else if (p == "full_classifier") e.provenance = Provenance::full_classifier;
        else if (p == "empty_rule") e.provenance = Provenance::empty_rule;
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(at + ": " + ex.what());
    }
  }
  return out;
}

inline ScoreProvider load_provider(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  ScoreProvider p;
  for (auto& e : parse_jsonl(text, path)) p.add(std::move(e.image_id), e.variant, std::move(e.ranking));
  return p;
}

}  // namespace predictions

}  // namespace trapdex
