#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "core.hpp"

/**
 * @file ingest.hpp
 *
 * @brief Parsers for MegaDetector batch output and COCO Camera Traps annotations.
 *
 * Every parse error names the source and the offending entry index.
 */

namespace trapdex::ingest {

using nlohmann::json;

struct DetectionImage {
  std::string file;
  std::vector<DetectionRecord> detections;
  std::optional<std::string> failure;
};

struct DetectionFile {
  std::vector<DetectionImage> images;
  /// Detector category code ("1", "2", ...) to category.
  std::map<std::string, DetectionCategory> category_map;
  /// `info.detector` / `info.format_version` when present.
  std::optional<std::string> detector;
  std::optional<std::string> format_version;
};

struct AnnotationSet {
  std::vector<ImageRecord> images;
  LabelSpace label_space;
  /// Source category id to label id.
  std::map<std::string, LabelId> category_ids;
  /// Images dropped because their annotations name more than one species.
  std::size_t excluded_multi_species = 0;
  std::vector<std::string> excluded_ids;

  const ImageRecord* find(std::string_view image_id) const {
    for (const auto& im : images)
      if (im.image_id == image_id) return &im;
    return nullptr;
  }
};

namespace detail {

inline std::string where(std::string_view source, std::string_view what, std::size_t index) {
  return std::string(source) + ": " + std::string(what) + "[" + std::to_string(index) + "]";
}

/// COCO ids may be integers or strings.
inline std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  if (j.is_number_unsigned()) return std::to_string(j.get<std::uint64_t>());
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d))) return std::to_string(static_cast<std::int64_t>(d));
  }
  throw Error("id must be a string or integer");
}

inline json parse_document(std::string_view document, std::string_view source) {
  try {
    return json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(std::string(source) + ": malformed JSON: " + e.what());
  }
}

}  // namespace detail

/**
 * Lenient timestamp parsing.
 *
 * Accepts `YYYY-MM-DD HH:MM:SS`, `YYYY:MM:DD HH:MM:SS` (EXIF), `YYYY/MM/DD HH:MM:SS`,
 * ISO-8601 with `T` and optional fractional seconds or zone suffix (ignored), and date-only forms.
 * Returns nullopt for anything else.
 */
inline std::optional<DateTime> parse_timestamp(std::string_view text) {
  std::string s(text);
  for (auto& c : s)
    if (c == 'T' || c == 't') c = ' ';
  DateTime dt;
  char sep1 = 0, sep2 = 0;
  int consumed = 0;
  const int n = std::sscanf(s.c_str(), "%4d%c%2d%c%2d%n", &dt.year, &sep1, &dt.month, &sep2, &dt.day, &consumed);
  if (n < 5 || sep1 != sep2 || (sep1 != '-' && sep1 != ':' && sep1 != '/')) return std::nullopt;
  std::string_view rest(s.c_str() + consumed);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (!rest.empty()) {
    std::string tail(rest);
    int h = 0, mi = 0, se = 0, used = 0;
    const int m = std::sscanf(tail.c_str(), "%2d:%2d%n:%2d%n", &h, &mi, &used, &se, &used);
    if (m < 2) return std::nullopt;
    dt.hour = h;
    dt.minute = mi;
    dt.second = m >= 3 ? se : 0;
  }
  if (dt.month < 1 || dt.month > 12 || dt.day < 1 || dt.day > 31 || dt.hour < 0 || dt.hour > 23 || dt.minute < 0 ||
      dt.minute > 59 || dt.second < 0 || dt.second > 60)
    return std::nullopt;
  return dt;
}

/// Validates and clamps a normalized box; tolerance kBoxTolerance absorbs emitter rounding.
inline NormBox checked_box(double x, double y, double w, double h, const std::string& where) {
  const double eps = kBoxTolerance;
  for (double v : {x, y, w, h})
    if (!std::isfinite(v)) throw Error(where + ": non-finite bbox coordinate");
  if (w <= 0 || h <= 0) throw Error(where + ": bbox width and height must be positive");
  if (x < -eps || y < -eps || x > 1 + eps || y > 1 + eps || x + w > 1 + eps || y + h > 1 + eps)
    throw Error(where + ": bbox [" + std::to_string(x) + ", " + std::to_string(y) + ", " + std::to_string(w) + ", " +
                std::to_string(h) + "] outside [0, 1]");
  NormBox b;
  b.x = std::clamp(x, 0.0, 1.0);
  b.y = std::clamp(y, 0.0, 1.0);
  b.w = std::min(w, 1.0 - b.x);
  b.h = std::min(h, 1.0 - b.y);
  if (b.w <= 0 || b.h <= 0) throw Error(where + ": bbox has no area inside the image");
  return b;
}

inline DetectionFile parse_megadetector_json(std::string_view document, std::string_view source = "<detections>") {
  const json doc = detail::parse_document(document, source);
  DetectionFile out;
  try {
    if (!doc.is_object() || !doc.contains("images") || !doc.at("images").is_array())
      throw Error(std::string(source) + ": missing 'images' array");
    if (doc.contains("detection_categories")) {
      for (const auto& [code, name] : doc.at("detection_categories").items()) {
        const auto cat = parse_detection_category(name.get<std::string>());
        if (!cat)
          throw Error(std::string(source) + ": unknown detection category name '" + name.get<std::string>() + "'");
        out.category_map.emplace(code, *cat);
      }
    } else {
      out.category_map = {{"1", DetectionCategory::animal},
                          {"2", DetectionCategory::person},
                          {"3", DetectionCategory::vehicle}};
    }
    if (doc.contains("info") && doc.at("info").is_object()) {
      const auto& info = doc.at("info");
      if (info.contains("detector") && info.at("detector").is_string())
        out.detector = info.at("detector").get<std::string>();
      if (info.contains("format_version")) {
        const auto& fv = info.at("format_version");
        out.format_version = fv.is_string() ? fv.get<std::string>() : fv.dump();
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string(source) + ": " + e.what());
  }

  const auto& images = doc.at("images");
  out.images.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto at = detail::where(source, "images", i);
    try {
      const auto& im = images[i];
      DetectionImage di;
      di.file = im.at("file").get<std::string>();
      if (im.contains("failure") && !im.at("failure").is_null()) di.failure = im.at("failure").get<std::string>();
      if (im.contains("detections") && !im.at("detections").is_null()) {
        const auto& dets = im.at("detections");
        if (!dets.is_array()) throw Error(at + ": 'detections' must be an array");
        for (std::size_t d = 0; d < dets.size(); ++d) {
          const auto dat = at + ".detections[" + std::to_string(d) + "]";
          const auto& det = dets[d];
          const auto code = detail::id_string(det.at("category"));
          auto cat = out.category_map.find(code);
          if (cat == out.category_map.end()) throw Error(dat + ": unknown category code '" + code + "'");
          const double conf = det.contains("conf") ? det.at("conf").get<double>() : det.at("confidence").get<double>();
          if (!(conf >= 0.0 && conf <= 1.0)) throw Error(dat + ": confidence outside [0, 1]");
          const auto& bb = det.at("bbox");
          if (!bb.is_array() || bb.size() != 4) throw Error(dat + ": bbox must have four numbers");
          DetectionRecord rec;
          rec.image_id = di.file;
          rec.category = cat->second;
          rec.confidence = conf;
          rec.bbox = checked_box(bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>(),
                                 dat);
          di.detections.push_back(std::move(rec));
        }
      } else if (!di.failure) {
        throw Error(at + ": missing 'detections'");
      }
      if (di.failure) di.detections.clear();
      out.images.push_back(std::move(di));
    } catch (const json::exception& e) {
      throw Error(at + ": " + e.what());
    }
  }
  return out;
}

/// Emits the MegaDetector batch format for the fields this engine carries.
inline std::string serialize_megadetector_json(const DetectionFile& file) {
  nlohmann::ordered_json doc;
  doc["images"] = nlohmann::ordered_json::array();
  std::map<DetectionCategory, std::string> code_of;
  for (const auto& [code, cat] : file.category_map) code_of.emplace(cat, code);
  for (const auto& im : file.images) {
    nlohmann::ordered_json j;
    j["file"] = im.file;
    j["detections"] = nlohmann::ordered_json::array();
    for (const auto& d : im.detections) {
      auto code = code_of.find(d.category);
      if (code == code_of.end())
        throw Error("category '" + std::string(to_string(d.category)) + "' has no code in the category map");
      j["detections"].push_back({{"category", code->second},
                                 {"conf", d.confidence},
                                 {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}});
    }
    if (im.failure) j["failure"] = *im.failure;
    doc["images"].push_back(std::move(j));
  }
  doc["detection_categories"] = nlohmann::ordered_json::object();
  for (const auto& [code, cat] : file.category_map) doc["detection_categories"][code] = to_string(cat);
  if (file.detector || file.format_version) {
    doc["info"] = nlohmann::ordered_json::object();
    if (file.detector) doc["info"]["detector"] = *file.detector;
    if (file.format_version) doc["info"]["format_version"] = *file.format_version;
  }
  return doc.dump();
}

inline AnnotationSet parse_coco_cameratraps(std::string_view document, std::string_view source = "<annotations>") {
  const json doc = detail::parse_document(document, source);
  for (const char* key : {"images", "annotations", "categories"})
    if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_array())
      throw Error(std::string(source) + ": missing '" + key + "' array");

  AnnotationSet out;

  // Label ids follow ascending source category id.
  std::vector<std::pair<std::string, std::string>> cats;
  const auto& categories = doc.at("categories");
  for (std::size_t i = 0; i < categories.size(); ++i) {
    try {
      cats.emplace_back(detail::id_string(categories[i].at("id")), categories[i].at("name").get<std::string>());
    } catch (const std::exception& e) {
      throw Error(detail::where(source, "categories", i) + ": " + e.what());
    }
  }
  std::stable_sort(cats.begin(), cats.end(), [](const auto& a, const auto& b) { return location_less(a.first, b.first); });
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (out.category_ids.count(cats[i].first))
      throw Error(std::string(source) + ": duplicate category id '" + cats[i].first + "'");
    try {
      out.category_ids.emplace(cats[i].first, out.label_space.add(cats[i].second));
    } catch (const Error& e) {
      throw Error(std::string(source) + ": category '" + cats[i].first + "': " + e.what());
    }
  }

  const auto& images = doc.at("images");
  std::unordered_map<std::string, std::size_t> index_of;
  out.images.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto at = detail::where(source, "images", i);
    try {
      const auto& im = images[i];
      ImageRecord rec;
      rec.image_id = detail::id_string(im.at("id"));
      rec.file_name = im.contains("file_name") ? im.at("file_name").get<std::string>() : rec.image_id;
      if (im.contains("location") && !im.at("location").is_null()) rec.location_id = detail::id_string(im.at("location"));
      rec.width = im.at("width").get<int>();
      rec.height = im.at("height").get<int>();
      if (rec.width < 1 || rec.height < 1) throw Error(at + ": width and height must be positive");
      if (im.contains("date_captured") && im.at("date_captured").is_string())
        rec.timestamp = parse_timestamp(im.at("date_captured").get<std::string>());
      for (const char* key : {"split_tag", "split"}) {
        if (!im.contains(key) || !im.at(key).is_string()) continue;
        const auto tag = im.at(key).get<std::string>();
        if (tag == "cis") rec.split_tag = SplitTag::cis;
        else if (tag == "trans") rec.split_tag = SplitTag::trans;
        break;
      }
      if (!index_of.emplace(rec.image_id, out.images.size()).second)
        throw Error(at + ": duplicate image id '" + rec.image_id + "'");
      out.images.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw Error(at + ": " + e.what());
    }
  }

  std::vector<std::set<LabelId>> labels_of(out.images.size());
  const auto& annotations = doc.at("annotations");
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto at = detail::where(source, "annotations", i);
    try {
      const auto& an = annotations[i];
      const auto image_id = detail::id_string(an.at("image_id"));
      auto im = index_of.find(image_id);
      if (im == index_of.end()) throw Error(at + ": references missing image '" + image_id + "'");
      const auto cat_id = detail::id_string(an.at("category_id"));
      auto cat = out.category_ids.find(cat_id);
      if (cat == out.category_ids.end()) throw Error(at + ": references missing category '" + cat_id + "'");
      labels_of[im->second].insert(cat->second);
    } catch (const json::exception& e) {
      throw Error(at + ": " + e.what());
    }
  }

  std::vector<ImageRecord> kept;
  kept.reserve(out.images.size());
  for (std::size_t i = 0; i < out.images.size(); ++i) {
    if (labels_of[i].size() > 1) {
      ++out.excluded_multi_species;
      out.excluded_ids.push_back(out.images[i].image_id);
      continue;
    }
    if (labels_of[i].size() == 1) out.images[i].gt_label = *labels_of[i].begin();
    kept.push_back(std::move(out.images[i]));
  }
  out.images = std::move(kept);
  return out;
}

}  // namespace trapdex::ingest
