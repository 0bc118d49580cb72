#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "core.hpp"

/**
 * @file store.hpp
 *
 * @brief On-disk embedding store.
 *
 * A store is a directory holding three files:
 *
 * - `manifest.json`: `{"dimension": D, "count": N, "dtype": "float32le", "variant": "..."}`
 * - `vectors.bin`: N*D little-endian IEEE-754 floats, row-major, no row headers.
 * - `records.jsonl`: one `{"image_id", "label", "location"}` object per row, in row order.
 *
 * Reading a store back reproduces ids, labels, locations and every vector bit-exactly.
 */

namespace trapdex::store {

namespace fs = std::filesystem;

inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kVectors = "vectors.bin";
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kDtype = "float32le";

struct WriteOptions {
  /// Required when writing zero records; otherwise checked against the records.
  std::optional<std::size_t> dimension;
  /// Defaults to the variant of the first record (or full for an empty store).
  std::optional<Variant> variant;
  /// When set, record labels must be ids of this space.
  const LabelSpace* labels = nullptr;
  /// Retrieval databases must not contain the reserved "empty" label.
  bool retrieval_database = false;
};

struct StoreInfo {
  fs::path path;
  std::size_t dimension = 0;
  std::size_t count = 0;
  Variant variant = Variant::full;
};

namespace detail {

inline void put_f32le(std::vector<char>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((bits >> s) & 0xFFu));
}

inline float get_f32le(const unsigned char* p) {
  const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                             (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline StoreInfo write_embedding_store(std::span<const EmbeddingRecord> records, const fs::path& dir,
                                       const WriteOptions& opts = {}) {
  std::size_t dim = 0;
  if (!records.empty()) {
    dim = records.front().vector.size();
    if (opts.dimension && *opts.dimension != dim)
      throw Error("dimension mismatch: declared " + std::to_string(*opts.dimension) + ", record '" +
                  records.front().image_id + "' has " + std::to_string(dim));
  } else if (opts.dimension) {
    dim = *opts.dimension;
  }
  if (dim == 0) throw Error("store dimension must be positive (declare it when writing zero records)");

  const Variant variant = opts.variant ? *opts.variant : (records.empty() ? Variant::full : records.front().variant);

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.vector.size() != dim)
      throw Error("dimension mismatch at record " + std::to_string(i) + " ('" + r.image_id + "'): expected " +
                  std::to_string(dim) + ", got " + std::to_string(r.vector.size()));
    if (r.variant != variant)
      throw Error("record " + std::to_string(i) + " ('" + r.image_id + "') has variant '" +
                  std::string(to_string(r.variant)) + "' but the store holds '" + std::string(to_string(variant)) +
                  "'");
    if (!seen.insert(r.image_id).second)
      throw Error("duplicate key (" + r.image_id + ", " + std::string(to_string(r.variant)) + ")");
    for (float v : r.vector)
      if (!std::isfinite(v)) throw Error("non-finite value in record '" + r.image_id + "'");
    if (r.label && opts.labels) {
      if (!opts.labels->contains(*r.label))
        throw Error("record '" + r.image_id + "' label " + std::to_string(*r.label) + " outside label space");
      if (opts.retrieval_database && opts.labels->name(*r.label) == kEmptyName)
        throw Error("record '" + r.image_id + "' carries the reserved 'empty' label; not allowed in a database");
    }
    if (r.label && *r.label < 0) throw Error("record '" + r.image_id + "' has a negative label");
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create store directory " + dir.string() + ": " + ec.message());

  std::vector<char> bytes;
  bytes.reserve(records.size() * dim * 4);
  for (const auto& r : records)
    for (float v : r.vector) detail::put_f32le(bytes, v);

  {
    std::ofstream out(dir / kVectors, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + (dir / kVectors).string());
  }
  {
    std::ofstream out(dir / kRecords, std::ios::binary | std::ios::trunc);
    for (const auto& r : records) {
      nlohmann::ordered_json j;
      j["image_id"] = r.image_id;
      j["label"] = r.label ? nlohmann::ordered_json(*r.label) : nlohmann::ordered_json(nullptr);
      j["location"] = r.location_id;
      out << j.dump() << '\n';
    }
    if (!out) throw Error("failed writing " + (dir / kRecords).string());
  }
  {
    nlohmann::ordered_json m;
    m["dimension"] = dim;
    m["count"] = records.size();
    m["dtype"] = kDtype;
    m["variant"] = to_string(variant);
    std::ofstream out(dir / kManifest, std::ios::binary | std::ios::trunc);
    out << m.dump(2) << '\n';
    if (!out) throw Error("failed writing " + (dir / kManifest).string());
  }
  return {dir, dim, records.size(), variant};
}

inline StoreInfo read_manifest(const fs::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(detail::read_file(dir / kManifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt manifest " + (dir / kManifest).string() + ": " + e.what());
  }
  StoreInfo info;
  info.path = dir;
  try {
    if (!m.is_object()) throw Error("not an object");
    if (m.at("dtype").get<std::string>() != kDtype)
      throw Error("unsupported dtype '" + m.at("dtype").get<std::string>() + "'");
    const auto d = m.at("dimension").get<std::int64_t>();
    const auto n = m.at("count").get<std::int64_t>();
    if (d <= 0) throw Error("dimension must be positive");
    if (n < 0) throw Error("count must be non-negative");
    info.dimension = static_cast<std::size_t>(d);
    info.count = static_cast<std::size_t>(n);
    const auto v = parse_variant(m.at("variant").get<std::string>());
    if (!v) throw Error("unknown variant '" + m.at("variant").get<std::string>() + "'");
    info.variant = *v;
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt manifest " + (dir / kManifest).string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error("corrupt manifest " + (dir / kManifest).string() + ": " + e.what());
  }
  return info;
}

inline EmbeddingMatrix read_embedding_store(const fs::path& dir) {
  const StoreInfo info = read_manifest(dir);
  const std::string bytes = detail::read_file(dir / kVectors);
  const std::size_t expected = info.count * info.dimension * 4;
  if (bytes.size() != expected) {
    std::string msg = "byte-count mismatch in " + (dir / kVectors).string() + ": file has " +
                      std::to_string(bytes.size()) + " bytes, manifest (count " + std::to_string(info.count) +
                      ", dimension " + std::to_string(info.dimension) + ") requires " + std::to_string(expected);
    if (info.count > 0 && bytes.size() % (info.count * 4) == 0)
      msg += "; file size corresponds to dimension " + std::to_string(bytes.size() / (info.count * 4));
    throw Error(msg);
  }

  const std::string text = detail::read_file(dir / kRecords);
  std::vector<nlohmann::json> rows;
  rows.reserve(info.count);
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) {
      try {
        rows.push_back(nlohmann::json::parse(text.begin() + static_cast<std::ptrdiff_t>(start),
                                             text.begin() + static_cast<std::ptrdiff_t>(end)));
      } catch (const nlohmann::json::exception& e) {
        throw Error((dir / kRecords).string() + " line " + std::to_string(rows.size() + 1) + ": " + e.what());
      }
    }
    start = end + 1;
  }
  if (rows.size() != info.count)
    throw Error((dir / kRecords).string() + " has " + std::to_string(rows.size()) + " rows, manifest count is " +
                std::to_string(info.count));

  EmbeddingMatrix m(info.dimension, info.variant);
  m.reserve(info.count);
  std::unordered_set<std::string> seen;
  std::vector<float> row(info.dimension);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < info.count; ++i) {
    std::string id;
    std::optional<LabelId> label;
    std::string location;
    try {
      const auto& j = rows[i];
      id = j.at("image_id").get<std::string>();
      if (j.contains("label") && !j.at("label").is_null()) label = j.at("label").get<LabelId>();
      if (j.contains("location") && !j.at("location").is_null()) location = j.at("location").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error((dir / kRecords).string() + " row " + std::to_string(i) + ": " + e.what());
    }
    if (!seen.insert(id).second) throw Error("duplicate image_id '" + id + "' in " + (dir / kRecords).string());
    for (std::size_t d = 0; d < info.dimension; ++d) {
      row[d] = detail::get_f32le(p + (i * info.dimension + d) * 4);
      if (std::isnan(row[d]))
        throw Error("NaN detected in " + (dir / kVectors).string() + " at row " + std::to_string(i) + ", component " +
                    std::to_string(d));
      if (std::isinf(row[d]))
        throw Error("Inf detected in " + (dir / kVectors).string() + " at row " + std::to_string(i) +
                    ", component " + std::to_string(d));
    }
    m.push_back(std::move(id), label, std::move(location), row);
  }
  return m;
}

}  // namespace trapdex::store
