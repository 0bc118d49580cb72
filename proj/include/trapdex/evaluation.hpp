#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "core.hpp"

/**
 * @file evaluation.hpp
 *
 * @brief Top-n accuracy, macro-F1, grouped reports, location-based split construction and
 * relative error reduction.
 */

namespace trapdex::eval {

/// Fraction of items whose ground truth is among the first n ranked labels.
inline double top_n_accuracy(std::span<const std::vector<LabelId>> ranked, std::span<const LabelId> truth,
                             std::size_t n) {
  if (ranked.size() != truth.size())
    throw Error("length mismatch: " + std::to_string(ranked.size()) + " predictions vs " +
                std::to_string(truth.size()) + " ground-truth labels");
  if (truth.empty()) throw Error("no items to evaluate");
  if (n == 0) throw ValidationError("n must be at least 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& r = ranked[i];
    const auto end = r.begin() + static_cast<std::ptrdiff_t>(std::min(n, r.size()));
    if (std::find(r.begin(), end, truth[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct ClassScore {
  LabelId label = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  /// False for classes that were predicted but never occur in the ground truth.
  bool in_truth = true;

  std::size_t support() const { return tp + fn; }
};

struct MacroF1 {
  double macro = 0;
  /// Ascending label id; includes predicted-only classes (excluded from the mean).
  std::vector<ClassScore> per_class;
};

/// Macro-averaged F1 over the classes present in the ground truth. F1 is 0 when P + R = 0.
inline MacroF1 macro_f1(std::span<const LabelId> predicted, std::span<const LabelId> truth) {
  if (predicted.size() != truth.size())
    throw Error("length mismatch: " + std::to_string(predicted.size()) + " predictions vs " +
                std::to_string(truth.size()) + " ground-truth labels");
  std::map<LabelId, ClassScore> table;
  for (auto t : truth) table[t].label = t;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) {
      ++table[truth[i]].tp;
    } else {
      ++table[truth[i]].fn;
      auto& p = table[predicted[i]];
      p.label = predicted[i];
      ++p.fp;
    }
  }
  MacroF1 out;
  std::size_t classes = 0;
  double sum = 0;
  for (auto& [label, c] : table) {
    c.in_truth = c.tp + c.fn > 0;
    c.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    c.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    c.f1 = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    if (c.in_truth) {
      sum += c.f1;
      ++classes;
    }
    out.per_class.push_back(c);
  }
  out.macro = classes ? sum / static_cast<double>(classes) : 0.0;
  return out;
}

struct MetricBlock {
  std::size_t count = 0;
  double top1 = 0;
  double top3 = 0;
  double macro_f1 = 0;
  std::vector<ClassScore> per_class;
};

struct EvalReport {
  MetricBlock overall;
  /// Keyed by group name (split tag or location), in ascending key order.
  std::map<std::string, MetricBlock> groups;
};

inline MetricBlock metric_block(std::span<const std::vector<LabelId>> ranked, std::span<const LabelId> truth) {
  MetricBlock b;
  b.count = truth.size();
  b.top1 = top_n_accuracy(ranked, truth, 1);
  b.top3 = top_n_accuracy(ranked, truth, 3);
  std::vector<LabelId> heads;
  heads.reserve(ranked.size());
  for (const auto& r : ranked) {
    if (r.empty()) throw Error("empty ranking");
    heads.push_back(r.front());
  }
  auto f1 = macro_f1(heads, truth);
  b.macro_f1 = f1.macro;
  b.per_class = std::move(f1.per_class);
  return b;
}

inline EvalReport grouped_report(std::span<const std::vector<LabelId>> ranked, std::span<const LabelId> truth,
                                 std::span<const std::string> groups) {
  if (ranked.size() != truth.size() || groups.size() != truth.size())
    throw Error("length mismatch between predictions, ground truth and groups");
  EvalReport rep;
  rep.overall = metric_block(ranked, truth);
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  for (const auto& [name, idx] : members) {
    std::vector<std::vector<LabelId>> r;
    std::vector<LabelId> t;
    r.reserve(idx.size());
    t.reserve(idx.size());
    for (auto i : idx) {
      r.push_back(ranked[i]);
      t.push_back(truth[i]);
    }
    rep.groups.emplace(name, metric_block(r, t));
  }
  return rep;
}

/// Fraction of the baseline error removed; accuracies in percent.
inline double relative_error_reduction(double acc_base, double acc_new) {
  if (!(acc_base >= 0 && acc_base <= 100) || !(acc_new >= 0 && acc_new <= 100))
    throw ValidationError("accuracies must be percentages in [0, 100]");
  if (acc_base == 100) throw ValidationError("baseline accuracy of 100% leaves no error to reduce");
  const double base_err = 100 - acc_base;
  const double new_err = 100 - acc_new;
  return (base_err - new_err) / base_err;
}

enum class Split { train, val, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

enum class SplitScheme { wct_location, safari_first_x, provided_cis_trans };

struct SplitConfig {
  SplitScheme scheme = SplitScheme::wct_location;
  double test_location_fraction = 1.0 / 3.0;
  double dev_train_fraction = 0.8;
  std::size_t x = 0;
  std::uint64_t seed = 0;
  /// Split dev images 80/20 within each class instead of over the pooled dev set.
  bool stratified = false;
};

/// Image id to split, in input image order. Under safari_first_x, `train` is the retrieval database.
struct SplitAssignment {
  std::vector<std::pair<std::string, Split>> entries;

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [s](const auto& e) { return e.second == s; }));
  }
};

namespace detail {

/// Unbiased draw in [0, bound) by rejection; stable across standard libraries, unlike std::uniform_int_distribution.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

/// Fisher-Yates with the draw above; std::shuffle is implementation-defined.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}

inline std::vector<std::string> sorted_locations(std::span<const ImageRecord> images) {
  std::set<std::string> uniq;
  for (const auto& im : images) {
    if (im.location_id.empty()) throw Error("image '" + im.image_id + "' has no location");
    uniq.insert(im.location_id);
  }
  std::vector<std::string> locs(uniq.begin(), uniq.end());
  std::sort(locs.begin(), locs.end(), [](const auto& a, const auto& b) { return location_less(a, b); });
  return locs;
}

inline std::size_t rounded_share(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

}  // namespace detail

/**
 * Location-disjoint test split plus a random dev train/val split.
 *
 * Locations are sorted, shuffled with the seeded generator, and the first ceil(L * fraction) become
 * test. Dev images, sorted by image id, are shuffled with the same generator and the first
 * round(n * dev_train_fraction) become train.
 */
inline SplitAssignment make_wct_split(std::span<const ImageRecord> images, const SplitConfig& cfg) {
  if (!(cfg.test_location_fraction > 0 && cfg.test_location_fraction < 1) ||
      !(cfg.dev_train_fraction > 0 && cfg.dev_train_fraction < 1))
    throw ValidationError("split fractions must lie in (0, 1)");
  auto locs = detail::sorted_locations(images);
  if (locs.size() < 3) throw Error("location split needs at least 3 locations, got " + std::to_string(locs.size()));

  std::mt19937_64 rng(cfg.seed);
  detail::shuffle(locs, rng);
  const auto n_test = static_cast<std::size_t>(
      std::ceil(static_cast<double>(locs.size()) * cfg.test_location_fraction - 1e-9));
  const std::set<std::string> test_locs(locs.begin(), locs.begin() + static_cast<std::ptrdiff_t>(n_test));

  std::unordered_map<std::string, Split> assigned;
  std::vector<const ImageRecord*> dev;
  for (const auto& im : images) {
    if (test_locs.count(im.location_id)) assigned[im.image_id] = Split::test;
    else dev.push_back(&im);
  }
  std::sort(dev.begin(), dev.end(), [](const auto* a, const auto* b) { return a->image_id < b->image_id; });

  auto split_pool = [&](std::vector<const ImageRecord*> pool) {
    detail::shuffle(pool, rng);
    const auto n_train = detail::rounded_share(pool.size(), cfg.dev_train_fraction);
    for (std::size_t i = 0; i < pool.size(); ++i) assigned[pool[i]->image_id] = i < n_train ? Split::train : Split::val;
  };
  if (cfg.stratified) {
    std::map<std::optional<LabelId>, std::vector<const ImageRecord*>> by_class;
    for (const auto* im : dev) by_class[im->gt_label].push_back(im);
    for (auto& [label, pool] : by_class) split_pool(std::move(pool));
  } else {
    split_pool(std::move(dev));
  }

  SplitAssignment out;
  out.entries.reserve(images.size());
  for (const auto& im : images) out.entries.emplace_back(im.image_id, assigned.at(im.image_id));
  return out;
}

/// Images of the x smallest location ids form the database (train); the rest are test.
inline SplitAssignment make_safari_split(std::span<const ImageRecord> images, std::size_t x) {
  const auto locs = detail::sorted_locations(images);
  if (x > locs.size())
    throw Error("x = " + std::to_string(x) + " exceeds the " + std::to_string(locs.size()) + " available locations");
  const std::set<std::string> db(locs.begin(), locs.begin() + static_cast<std::ptrdiff_t>(x));
  SplitAssignment out;
  out.entries.reserve(images.size());
  for (const auto& im : images) out.entries.emplace_back(im.image_id, db.count(im.location_id) ? Split::train : Split::test);
  return out;
}

}  // namespace trapdex::eval
