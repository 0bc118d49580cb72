#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

/**
 * @file core.hpp
 *
 * @brief Shared data model: labels, images, detections and embeddings.
 */

namespace trapdex {

/// Engine failure caused by bad data or I/O (CLI exit status 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied an invalid option or option combination (CLI exit status 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

using LabelId = std::int32_t;

/// Label emitted by the empty-image rule when the label space has no "empty" class.
inline constexpr LabelId kEmptyLabel = -1;
inline constexpr std::string_view kEmptyName = "empty";

struct ClassLabel {
  LabelId id = 0;
  std::string name;
};

/// Ordered set of class labels with contiguous ids 0..n-1.
class LabelSpace {
 public:
  LabelSpace() = default;

  explicit LabelSpace(std::vector<std::string> names) {
    for (auto& n : names) add(std::move(n));
  }

  LabelId add(std::string name) {
    if (name.empty()) throw Error("label name must be non-empty");
    for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (by_name_.count(name)) throw Error("duplicate label name '" + name + "'");
    const auto id = static_cast<LabelId>(labels_.size());
    if (name == kEmptyName) has_empty_ = true;
    by_name_.emplace(name, id);
    labels_.push_back({id, std::move(name)});
    return id;
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  bool has_empty() const { return has_empty_; }
  const std::vector<ClassLabel>& labels() const { return labels_; }

  bool contains(LabelId id) const { return id >= 0 && static_cast<std::size_t>(id) < labels_.size(); }

  const std::string& name(LabelId id) const {
    if (!contains(id)) throw Error("label id " + std::to_string(id) + " outside label space");
    return labels_[static_cast<std::size_t>(id)].name;
  }

  std::optional<LabelId> find(std::string_view name) const {
    std::string key(name);
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto it = by_name_.find(key);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<LabelId> empty_id() const { return find(kEmptyName); }

  /// Names in id order, without the reserved empty label.
  std::vector<std::string> category_names() const {
    std::vector<std::string> out;
    for (const auto& l : labels_)
      if (l.name != kEmptyName) out.push_back(l.name);
    return out;
  }

 private:
  std::vector<ClassLabel> labels_;
  std::unordered_map<std::string, LabelId> by_name_;
  bool has_empty_ = false;
};

struct DateTime {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  auto operator<=>(const DateTime&) const = default;
};

enum class SplitTag { none, cis, trans };

inline std::string_view to_string(SplitTag t) {
  switch (t) {
    case SplitTag::cis: return "cis";
    case SplitTag::trans: return "trans";
    case SplitTag::none: break;
  }
  return "none";
}

struct ImageRecord {
  std::string image_id;
  std::string file_name;
  std::string location_id;
  int width = 1;
  int height = 1;
  std::optional<DateTime> timestamp;
  std::optional<LabelId> gt_label;
  SplitTag split_tag = SplitTag::none;
};

enum class DetectionCategory { animal, person, vehicle };

inline std::string_view to_string(DetectionCategory c) {
  switch (c) {
    case DetectionCategory::animal: return "animal";
    case DetectionCategory::person: return "person";
    case DetectionCategory::vehicle: return "vehicle";
  }
  return "animal";
}

inline std::optional<DetectionCategory> parse_detection_category(std::string_view s) {
  if (s == "animal") return DetectionCategory::animal;
  if (s == "person") return DetectionCategory::person;
  if (s == "vehicle") return DetectionCategory::vehicle;
  return std::nullopt;
}

/// Normalized [0,1] box, top-left origin.
struct NormBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  bool operator==(const NormBox&) const = default;
};

inline constexpr double kBoxTolerance = 1e-6;

struct DetectionRecord {
  std::string image_id;
  DetectionCategory category = DetectionCategory::animal;
  double confidence = 0;
  NormBox bbox;

  bool operator==(const DetectionRecord&) const = default;
};

enum class Variant { full, cropped, segmented };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::cropped: return "cropped";
    case Variant::segmented: return "segmented";
  }
  return "full";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "full") return Variant::full;
  if (s == "cropped") return Variant::cropped;
  if (s == "segmented") return Variant::segmented;
  return std::nullopt;
}

struct EmbeddingRecord {
  std::string image_id;
  Variant variant = Variant::full;
  std::optional<LabelId> label;
  std::string location_id;
  std::vector<float> vector;
};

/// Row-major N x D block of embeddings with parallel id/label/location arrays.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::size_t dimension, Variant variant = Variant::full)
      : dimension_(dimension), variant_(variant) {
    if (dimension == 0) throw Error("embedding dimension must be positive");
  }

  static EmbeddingMatrix from_records(std::span<const EmbeddingRecord> records, std::size_t dimension) {
    EmbeddingMatrix m(dimension, records.empty() ? Variant::full : records.front().variant);
    m.reserve(records.size());
    for (const auto& r : records) {
      if (r.variant != m.variant_)
        throw Error("mixed variants in one matrix: '" + std::string(to_string(r.variant)) + "' vs '" +
                    std::string(to_string(m.variant_)) + "'");
      m.push_back(r.image_id, r.label, r.location_id, r.vector);
    }
    return m;
  }

  void reserve(std::size_t n) {
    data_.reserve(n * dimension_);
    ids_.reserve(n);
    labels_.reserve(n);
    locations_.reserve(n);
  }

  void push_back(std::string id, std::optional<LabelId> label, std::string location, std::span<const float> row) {
    if (row.size() != dimension_)
      throw Error("dimension mismatch for '" + id + "': expected " + std::to_string(dimension_) + ", got " +
                  std::to_string(row.size()));
    for (float v : row)
      if (!std::isfinite(v)) throw Error("non-finite value in embedding '" + id + "'");
    data_.insert(data_.end(), row.begin(), row.end());
    ids_.push_back(std::move(id));
    labels_.push_back(label);
    locations_.push_back(std::move(location));
  }

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  Variant variant() const { return variant_; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dimension_, dimension_}; }
  std::span<const float> data() const { return data_; }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::optional<LabelId> label(std::size_t i) const { return labels_[i]; }
  const std::string& location(std::size_t i) const { return locations_[i]; }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::optional<LabelId>>& labels() const { return labels_; }
  const std::vector<std::string>& locations() const { return locations_; }

  std::vector<EmbeddingRecord> to_records() const {
    std::vector<EmbeddingRecord> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      auto r = row(i);
      out.push_back({ids_[i], variant_, labels_[i], locations_[i], std::vector<float>(r.begin(), r.end())});
    }
    return out;
  }

 private:
  std::size_t dimension_ = 0;
  Variant variant_ = Variant::full;
  std::vector<float> data_;
  std::vector<std::string> ids_;
  std::vector<std::optional<LabelId>> labels_;
  std::vector<std::string> locations_;
};

/// Orders location ids numerically when both are plain digit strings, lexicographically otherwise.
inline bool location_less(std::string_view a, std::string_view b) {
  auto digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (digits(a) && digits(b)) {
    auto strip = [](std::string_view s) {
      auto p = s.find_first_not_of('0');
      return p == std::string_view::npos ? std::string_view("0") : s.substr(p);
    };
    auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

}  // namespace trapdex
