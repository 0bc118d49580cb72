#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "core.hpp"

/**
 * @file geometry.hpp
 *
 * @brief Deterministic preprocessing geometry: primary detection selection, square crop planning,
 * mask centering and grouping of images for averaged empty frames.
 *
 * Only plans are produced here; applying them to pixels is left to the caller
 * (`compose_centered` is a small reference applier used by tests and tools).
 */

namespace trapdex::geometry {

inline constexpr double kDefaultConfThreshold = 0.2;

/// Integer pixel rectangle, top-left origin.
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const PixelRect&) const = default;
};

struct CropPlan {
  PixelRect rect;
  int pad_left = 0;
  int pad_top = 0;
  int pad_right = 0;
  int pad_bottom = 0;
  int side = 0;

  bool operator==(const CropPlan&) const = default;
};

struct CropOptions {
  /// When the square exceeds an image dimension: pad symmetrically (true) or shrink the square to fit (false).
  bool pad_oversize = true;
};

/**
 * Highest-confidence detection with confidence >= threshold, optionally animals only.
 * Ties keep the earliest detection. An empty result is the router's no-detection branch.
 */
inline std::optional<DetectionRecord> select_primary_detection(std::span<const DetectionRecord> dets,
                                                               double conf_threshold = kDefaultConfThreshold,
                                                               bool animals_only = false) {
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0))
    throw ValidationError("confidence threshold must be in [0, 1]");
  const DetectionRecord* best = nullptr;
  for (const auto& d : dets) {
    if (d.confidence < conf_threshold) continue;
    if (animals_only && d.category != DetectionCategory::animal) continue;
    if (!best || d.confidence > best->confidence) best = &d;
  }
  if (!best) return std::nullopt;
  return *best;
}

namespace detail {

// Products like 0.7 * 100 land a hair off the integer; snap those before floor/ceil.
inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-6 ? r : v;
}

// Places a segment of length `side` around [lo, lo + len) inside [0, extent).
// Returns {start, covered length, pad before, pad after}.
inline std::array<int, 4> place_axis(int lo, int len, int side, int extent, bool pad_oversize) {
  if (side <= extent) {
    int start = lo - (side - len) / 2;
    start = std::clamp(start, 0, extent - side);
    return {start, side, 0, 0};
  }
  if (pad_oversize) {
    const int pad = side - extent;
    return {0, extent, pad / 2, pad - pad / 2};
  }
  return {0, extent, 0, 0};
}

}  // namespace detail

/**
 * Square crop around a detection without resampling.
 *
 * The side is the longer edge of the pixel box. The square is centered on the box and shifted
 * (never shrunk) to stay inside the image. If the side exceeds an image dimension, that axis spans
 * the full image and symmetric padding (extra pixel after) restores a square output.
 */
inline CropPlan square_crop_rect(const NormBox& bbox, int img_w, int img_h, const CropOptions& opts = {}) {
  if (img_w < 1 || img_h < 1) throw Error("image dimensions must be positive");
  if (!(bbox.w > 0) || !(bbox.h > 0)) throw Error("zero-area bbox");

  const double px = bbox.x * img_w, py = bbox.y * img_h;
  const double pw = bbox.w * img_w, ph = bbox.h * img_h;
  const int left = std::clamp(static_cast<int>(std::floor(detail::snap(px))), 0, img_w);
  const int top = std::clamp(static_cast<int>(std::floor(detail::snap(py))), 0, img_h);
  const int right = std::clamp(static_cast<int>(std::ceil(detail::snap(px + pw))), 0, img_w);
  const int bottom = std::clamp(static_cast<int>(std::ceil(detail::snap(py + ph))), 0, img_h);
  const int bw = right - left, bh = bottom - top;
  if (bw <= 0 || bh <= 0) throw Error("zero-area bbox after scaling to pixels");

  int side = std::max(bw, bh);
  if (!opts.pad_oversize) side = std::min({side, img_w, img_h});

  const auto [rx, rw, pl, pr] = detail::place_axis(left, bw, side, img_w, opts.pad_oversize);
  const auto [ry, rh, pt, pb] = detail::place_axis(top, bh, side, img_h, opts.pad_oversize);
  return {{rx, ry, rw, rh}, pl, pt, pr, pb, side};
}

struct MaskPlacement {
  PixelRect mask_rect;
  int dx = 0;
  int dy = 0;
  int canvas_side = 0;
  std::array<std::uint8_t, 3> fill{0, 0, 0};

  PixelRect placed() const { return {mask_rect.x + dx, mask_rect.y + dy, mask_rect.w, mask_rect.h}; }
};

/// Offset moving the mask rectangle's center to the canvas center; odd differences round toward the origin.
inline MaskPlacement mask_center_plan(const PixelRect& mask_rect, int canvas_side, std::uint8_t fill = 0) {
  if (canvas_side < 1) throw Error("canvas side must be positive");
  if (mask_rect.w < 1 || mask_rect.h < 1) throw Error("mask rect is empty");
  if (mask_rect.w > canvas_side || mask_rect.h > canvas_side)
    throw Error("mask rect " + std::to_string(mask_rect.w) + "x" + std::to_string(mask_rect.h) +
                " larger than canvas " + std::to_string(canvas_side));
  if (mask_rect.x < 0 || mask_rect.y < 0 || mask_rect.x + mask_rect.w > canvas_side ||
      mask_rect.y + mask_rect.h > canvas_side)
    throw Error("mask rect lies outside the crop");
  MaskPlacement p;
  p.mask_rect = mask_rect;
  p.canvas_side = canvas_side;
  p.dx = (canvas_side - mask_rect.w) / 2 - mask_rect.x;
  p.dy = (canvas_side - mask_rect.h) / 2 - mask_rect.y;
  p.fill = {fill, fill, fill};
  return p;
}

/**
 * Applies a placement to an interleaved square crop (side x side x channels, channels <= 3).
 * Pixels where `mask` is zero, and everything outside the translated mask rect, take the fill value.
 */
inline std::vector<std::uint8_t> compose_centered(std::span<const std::uint8_t> crop, std::span<const std::uint8_t> mask,
                                                  int channels, const MaskPlacement& plan) {
  const int s = plan.canvas_side;
  if (channels < 1 || channels > 3) throw Error("channels must be 1..3");
  if (crop.size() != static_cast<std::size_t>(s) * s * channels || mask.size() != static_cast<std::size_t>(s) * s)
    throw Error("crop/mask size does not match the canvas");
  std::vector<std::uint8_t> out(crop.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = plan.fill[i % static_cast<std::size_t>(channels)];
  const auto& r = plan.mask_rect;
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      const auto src = static_cast<std::size_t>(y) * s + x;
      if (!mask[src]) continue;
      const auto dst = static_cast<std::size_t>(y + plan.dy) * s + (x + plan.dx);
      for (int c = 0; c < channels; ++c) out[dst * channels + c] = crop[src * channels + c];
    }
  }
  return out;
}

enum class TimeOfDay { day, night };

struct CalendarDay {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const CalendarDay&) const = default;
};

struct EmptyAverageGroup {
  std::string location_id;
  std::optional<CalendarDay> date;
  std::optional<TimeOfDay> time_of_day;
  std::vector<std::string> members;
};

struct DayWindow {
  /// Seconds after midnight; [day_start, night_start) is daytime.
  int day_start = 6 * 3600;
  int night_start = 18 * 3600;
};

inline TimeOfDay time_of_day(const DateTime& t, const DayWindow& window = {}) {
  const int s = t.hour * 3600 + t.minute * 60 + t.second;
  return (s >= window.day_start && s < window.night_start) ? TimeOfDay::day : TimeOfDay::night;
}

/**
 * Groups images for averaged empty frames by (location, calendar day, day/night).
 * Images without timestamps form one group per location. Singleton groups are dropped.
 * Groups come out sorted by key; members keep input order.
 */
inline std::vector<EmptyAverageGroup> plan_empty_averages(std::span<const ImageRecord> images,
                                                          const DayWindow& window = {}) {
  // Untimed groups sort after timed ones at the same location.
  using Key = std::tuple<std::string, int, CalendarDay, int>;
  auto key_less = [](const Key& a, const Key& b) {
    if (std::get<0>(a) != std::get<0>(b)) return location_less(std::get<0>(a), std::get<0>(b));
    return std::tie(std::get<1>(a), std::get<2>(a), std::get<3>(a)) <
           std::tie(std::get<1>(b), std::get<2>(b), std::get<3>(b));
  };
  std::map<Key, std::vector<std::string>, decltype(key_less)> groups(key_less);
  for (const auto& im : images) {
    if (im.timestamp) {
      const auto& t = *im.timestamp;
      groups[{im.location_id, 0, CalendarDay{t.year, t.month, t.day}, static_cast<int>(time_of_day(t, window))}]
          .push_back(im.image_id);
    } else {
      groups[{im.location_id, 1, CalendarDay{}, 0}].push_back(im.image_id);
    }
  }
  std::vector<EmptyAverageGroup> out;
  for (auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    EmptyAverageGroup g;
    g.location_id = std::get<0>(key);
    if (std::get<1>(key) == 0) {
      g.date = std::get<2>(key);
      g.time_of_day = static_cast<TimeOfDay>(std::get<3>(key));
    }
    g.members = std::move(members);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace trapdex::geometry
