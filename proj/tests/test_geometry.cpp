#include <gtest/gtest.h>

#include <random>

#include "geometry_oracle.hpp"
#include "trapdex/geometry.hpp"

using namespace trapdex;
using namespace trapdex::geometry;

namespace {

DetectionRecord det(DetectionCategory c, double conf) { return {"img", c, conf, {0.1, 0.1, 0.2, 0.2}}; }

ImageRecord image(std::string id, std::string loc, std::optional<DateTime> ts) {
  ImageRecord im;
  im.image_id = std::move(id);
  im.location_id = std::move(loc);
  im.timestamp = ts;
  return im;
}

}  // namespace

TEST(PrimaryDetection, EmptyInputIsNone) { EXPECT_FALSE(select_primary_detection({}, 0.2, false)); }

TEST(PrimaryDetection, HighestConfidenceWins) {
  const std::vector<DetectionRecord> dets = {det(DetectionCategory::animal, 0.60), det(DetectionCategory::animal, 0.95)};
  const auto p = select_primary_detection(dets, 0.2);
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ(p->confidence, 0.95);
}

TEST(PrimaryDetection, AnimalsOnlyIgnoresPeople) {
  const std::vector<DetectionRecord> dets = {det(DetectionCategory::person, 0.90)};
  EXPECT_FALSE(select_primary_detection(dets, 0.2, true));
  EXPECT_TRUE(select_primary_detection(dets, 0.2, false));
}

TEST(PrimaryDetection, RejectsThresholdOutsideUnitInterval) {
  EXPECT_THROW(select_primary_detection({}, 1.5), ValidationError);
}

// Every combination of up to three detections over categories, a confidence grid,
// thresholds and the animals-only flag against a direct restatement of the rule.
TEST(PrimaryDetection, ExhaustiveAgainstRuleRestatement) {
  const std::vector<double> confs = {0.0, 0.1, 0.2, 0.5, 0.9};
  const std::vector<DetectionCategory> cats = {DetectionCategory::animal, DetectionCategory::person,
                                               DetectionCategory::vehicle};
  std::vector<DetectionRecord> pool;
  for (auto c : cats)
    for (double f : confs) pool.push_back(det(c, f));
  std::size_t checked = 0;
  for (std::size_t n = 0; n <= 3; ++n) {
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      std::vector<DetectionRecord> dets;
      for (auto i : idx) dets.push_back(pool[i]);
      for (double thr : {0.0, 0.2, 0.5, 1.0}) {
        for (bool animals : {false, true}) {
          std::optional<std::size_t> expect;
          for (std::size_t i = 0; i < dets.size(); ++i) {
            const bool pass = dets[i].confidence >= thr && (!animals || dets[i].category == DetectionCategory::animal);
            if (pass && (!expect || dets[i].confidence > dets[*expect].confidence)) expect = i;
          }
          const auto got = select_primary_detection(dets, thr, animals);
          ASSERT_EQ(got.has_value(), expect.has_value());
          if (got) {
            EXPECT_EQ(*got, dets[*expect]);
          }
          ++checked;
        }
      }
      std::size_t p = 0;
      while (p < n && ++idx[p] == pool.size()) idx[p++] = 0;
      if (p == n) break;
    }
  }
  EXPECT_GT(checked, 20000u);
}

TEST(SquareCrop, WideBoxShiftsVertically) {
  const auto plan = square_crop_rect({0.1, 0.1, 0.2, 0.1}, 1000, 800);
  EXPECT_EQ(plan.rect, (PixelRect{100, 20, 200, 200}));
  EXPECT_EQ(plan.side, 200);
  EXPECT_EQ(plan.pad_left + plan.pad_top + plan.pad_right + plan.pad_bottom, 0);
}

TEST(SquareCrop, FullFramePadsShortAxis) {
  const auto plan = square_crop_rect({0, 0, 1, 1}, 800, 600);
  EXPECT_EQ(plan.rect, (PixelRect{0, 0, 800, 600}));
  EXPECT_EQ(plan.side, 800);
  EXPECT_EQ(plan.pad_top, 100);
  EXPECT_EQ(plan.pad_bottom, 100);
  EXPECT_EQ(plan.pad_left, 0);
  EXPECT_EQ(plan.pad_right, 0);
}

TEST(SquareCrop, ZeroAreaRejected) { EXPECT_THROW(square_crop_rect({0.5, 0.5, 0, 0.2}, 100, 100), Error); }

TEST(SquareCrop, OddDifferenceFavorsOrigin) {
  // 10x7 box: three extra rows split 1 above, 2 below.
  const auto plan = square_crop_rect({0.2, 0.2, 0.1, 0.07}, 100, 100);
  EXPECT_EQ(plan.rect, (PixelRect{20, 19, 10, 10}));
}

TEST(SquareCrop, ShiftsAwayFromEdges) {
  const auto left = square_crop_rect({0.0, 0.4, 0.05, 0.2}, 1000, 500);
  EXPECT_EQ(left.rect, (PixelRect{0, 200, 100, 100}));
  const auto right = square_crop_rect({0.95, 0.4, 0.05, 0.2}, 1000, 500);
  EXPECT_EQ(right.rect, (PixelRect{900, 200, 100, 100}));
}

TEST(SquareCrop, ClipModeShrinksInsteadOfPadding) {
  const auto plan = square_crop_rect({0, 0, 1, 1}, 800, 600, {.pad_oversize = false});
  EXPECT_EQ(plan.side, 600);
  EXPECT_EQ(plan.rect, (PixelRect{100, 0, 600, 600}));
  EXPECT_EQ(plan.pad_top + plan.pad_bottom, 0);
}

TEST(SquareCrop, RandomizedGeometryProperties) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 20000; ++i) {
    const auto c = trapdex::testing::random_crop_case(rng);
    const auto plan = square_crop_rect(c.box, c.width, c.height);
    const auto err = trapdex::testing::check_crop_plan(plan, c);
    ASSERT_TRUE(err.empty()) << err;
  }
}

TEST(MaskCenter, CornerMaskMovesToCenter) {
  const auto p = mask_center_plan({0, 0, 10, 10}, 100);
  EXPECT_EQ(p.dx, 45);
  EXPECT_EQ(p.dy, 45);
  EXPECT_EQ(p.placed(), (PixelRect{45, 45, 10, 10}));
}

TEST(MaskCenter, CenteredMaskIsFixedPoint) {
  const auto p = mask_center_plan({45, 45, 10, 10}, 100);
  EXPECT_EQ(p.dx, 0);
  EXPECT_EQ(p.dy, 0);
}

TEST(MaskCenter, OversizeMaskRejected) { EXPECT_THROW(mask_center_plan({0, 0, 120, 10}, 100), Error); }

TEST(MaskCenter, IdempotentAndInsideCanvas) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5000; ++i) {
    const int side = 1 + static_cast<int>(rng() % 300);
    const int w = 1 + static_cast<int>(rng() % side), h = 1 + static_cast<int>(rng() % side);
    const int x = static_cast<int>(rng() % (side - w + 1)), y = static_cast<int>(rng() % (side - h + 1));
    const auto p = mask_center_plan({x, y, w, h}, side);
    const auto placed = p.placed();
    ASSERT_GE(placed.x, 0);
    ASSERT_GE(placed.y, 0);
    ASSERT_LE(placed.x + placed.w, side);
    ASSERT_LE(placed.y + placed.h, side);
    // Center offsets on each side differ by at most one pixel, extra pixel after.
    ASSERT_TRUE(side - placed.x - placed.w - placed.x == 0 || side - placed.x - placed.w - placed.x == 1);
    const auto again = mask_center_plan(placed, side);
    ASSERT_EQ(again.dx, 0);
    ASSERT_EQ(again.dy, 0);
  }
}

TEST(MaskCenter, ComposeFillsEverythingOutsideTheMask) {
  const int side = 6;
  std::vector<std::uint8_t> crop(side * side, 200), mask(side * side, 0);
  // 2x2 object at the top-left corner, one pixel of it masked out.
  mask[0] = mask[1] = mask[side] = 1;
  const auto plan = mask_center_plan({0, 0, 2, 2}, side, 7);
  const auto out = compose_centered(crop, mask, 1, plan);
  int kept = 0;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const auto v = out[static_cast<std::size_t>(y * side + x)];
      if (v == 200) {
        ++kept;
        EXPECT_TRUE(x >= 2 && x < 4 && y >= 2 && y < 4);
      } else {
        EXPECT_EQ(v, 7);
      }
    }
  EXPECT_EQ(kept, 3);
}

TEST(EmptyAverages, SplitsDayAndNight) {
  const std::vector<ImageRecord> ims = {image("a", "L1", DateTime{2020, 5, 1, 8, 0, 0}),
                                        image("b", "L1", DateTime{2020, 5, 1, 14, 0, 0}),
                                        image("c", "L1", DateTime{2020, 5, 1, 2, 0, 0}),
                                        image("d", "L1", DateTime{2020, 5, 1, 22, 30, 0})};
  const auto groups = plan_empty_averages(ims);
  ASSERT_EQ(groups.size(), 2u);
  for (const auto& g : groups) EXPECT_EQ(g.members.size(), 2u);
  EXPECT_EQ(groups[0].time_of_day, TimeOfDay::day);
  EXPECT_EQ(groups[0].members, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(groups[1].time_of_day, TimeOfDay::night);
  EXPECT_EQ(groups[1].members, (std::vector<std::string>{"c", "d"}));
}

TEST(EmptyAverages, SingletonsDropped) {
  const std::vector<ImageRecord> ims = {image("a", "L1", DateTime{2020, 5, 1, 8, 0, 0})};
  EXPECT_TRUE(plan_empty_averages(ims).empty());
}

TEST(EmptyAverages, MissingTimestampsGroupByLocation) {
  const std::vector<ImageRecord> ims = {image("a", "L1", std::nullopt), image("b", "L1", std::nullopt),
                                        image("c", "L2", std::nullopt)};
  const auto groups = plan_empty_averages(ims);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].location_id, "L1");
  EXPECT_FALSE(groups[0].date);
  EXPECT_FALSE(groups[0].time_of_day);
  EXPECT_EQ(groups[0].members, (std::vector<std::string>{"a", "b"}));
}

TEST(EmptyAverages, BoundariesAndDatesSeparateGroups) {
  const std::vector<ImageRecord> ims = {image("a", "L1", DateTime{2020, 5, 1, 6, 0, 0}),
                                        image("b", "L1", DateTime{2020, 5, 1, 17, 59, 59}),
                                        image("c", "L1", DateTime{2020, 5, 2, 12, 0, 0}),
                                        image("d", "L2", DateTime{2020, 5, 2, 12, 0, 0}),
                                        image("e", "L1", DateTime{2020, 5, 1, 18, 0, 0})};
  const auto groups = plan_empty_averages(ims);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].members, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(groups[0].date, (CalendarDay{2020, 5, 1}));
}

TEST(EmptyAverages, ConfigurableDayWindow) {
  const std::vector<ImageRecord> ims = {image("a", "L1", DateTime{2020, 5, 1, 5, 0, 0}),
                                        image("b", "L1", DateTime{2020, 5, 1, 12, 0, 0})};
  EXPECT_TRUE(plan_empty_averages(ims).empty());
  EXPECT_EQ(plan_empty_averages(ims, {4 * 3600, 20 * 3600}).size(), 1u);
}
