#include <gtest/gtest.h>

#include <map>
#include <set>

#include "f1_oracle.hpp"
#include "test_util.hpp"
#include "trapdex/evaluation.hpp"

using namespace trapdex;
using namespace trapdex::eval;

namespace {

std::vector<std::vector<LabelId>> singletons(const std::vector<LabelId>& heads) {
  std::vector<std::vector<LabelId>> out;
  for (auto h : heads) out.push_back({h});
  return out;
}

std::vector<ImageRecord> grid_images(int locations, int per_location) {
  std::vector<ImageRecord> out;
  for (int l = 0; l < locations; ++l)
    for (int i = 0; i < per_location; ++i) {
      ImageRecord im;
      im.image_id = "im" + std::to_string(l) + "_" + std::to_string(i);
      im.location_id = std::to_string(l + 1);
      im.gt_label = (l + i) % 4;
      out.push_back(im);
    }
  return out;
}

}  // namespace

TEST(TopN, Basics) {
  const std::vector<std::vector<LabelId>> ranked = {{1, 2, 3}, {2, 1}, {3}, {4, 5, 6, 7}};
  const std::vector<LabelId> truth = {1, 1, 2, 7};
  EXPECT_DOUBLE_EQ(top_n_accuracy(ranked, truth, 1), 0.25);
  EXPECT_DOUBLE_EQ(top_n_accuracy(ranked, truth, 2), 0.5);
  EXPECT_DOUBLE_EQ(top_n_accuracy(ranked, truth, 3), 0.5);
  EXPECT_DOUBLE_EQ(top_n_accuracy(ranked, truth, 4), 0.75);
  EXPECT_THROW(top_n_accuracy(ranked, std::vector<LabelId>{1}, 1), Error);
  EXPECT_THROW(top_n_accuracy(ranked, truth, 0), ValidationError);
}

TEST(TopN, MonotoneInN) {
  std::mt19937_64 rng(4);
  std::vector<std::vector<LabelId>> ranked;
  std::vector<LabelId> truth;
  for (int i = 0; i < 200; ++i) {
    std::vector<LabelId> r = {0, 1, 2, 3, 4, 5};
    std::shuffle(r.begin(), r.end(), rng);
    ranked.push_back(r);
    truth.push_back(static_cast<LabelId>(rng() % 6));
  }
  double prev = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    const double a = top_n_accuracy(ranked, truth, n);
    EXPECT_GE(a, prev);
    prev = a;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(MacroF1, WorkedExample) {
  // A = 0, B = 1.
  const std::vector<LabelId> truth = {0, 0, 1, 1};
  const std::vector<LabelId> pred = {0, 1, 1, 1};
  const auto m = macro_f1(pred, truth);
  ASSERT_EQ(m.per_class.size(), 2u);
  EXPECT_NEAR(m.per_class[0].f1, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.per_class[1].f1, 0.8, 1e-15);
  EXPECT_NEAR(m.macro, 0.7333333333333333, 1e-12);
}

TEST(MacroF1, PredictedOnlyClassIsNotAveraged) {
  const std::vector<LabelId> truth = {0, 0};
  const std::vector<LabelId> pred = {0, 5};
  const auto m = macro_f1(pred, truth);
  ASSERT_EQ(m.per_class.size(), 2u);
  EXPECT_FALSE(m.per_class[1].in_truth);
  EXPECT_NEAR(m.macro, 2.0 / 3.0, 1e-15);
}

TEST(MacroF1, MatchesConfusionOracle) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 300;
    const int k = 1 + static_cast<int>(rng() % 8);
    std::vector<LabelId> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<LabelId>(rng() % k);
      pred[i] = rng() % 3 ? truth[i] : static_cast<LabelId>(rng() % (k + 2));
    }
    ASSERT_NEAR(macro_f1(pred, truth).macro, trapdex::testing::oracle_macro_f1(pred, truth), 1e-12);
  }
}

TEST(MacroF1, InvariantUnderRelabeling) {
  std::mt19937_64 rng(23);
  std::vector<LabelId> pred(100), truth(100);
  for (int i = 0; i < 100; ++i) {
    truth[i] = static_cast<LabelId>(rng() % 5);
    pred[i] = static_cast<LabelId>(rng() % 5);
  }
  const std::vector<LabelId> perm = {3, 0, 4, 1, 2};
  std::vector<LabelId> p2, t2;
  for (int i = 0; i < 100; ++i) {
    p2.push_back(perm[pred[i]]);
    t2.push_back(perm[truth[i]]);
  }
  EXPECT_NEAR(macro_f1(pred, truth).macro, macro_f1(p2, t2).macro, 1e-15);
}

TEST(Grouped, PerGroupAndOverall) {
  const std::vector<LabelId> truth = {0, 1, 2, 0};
  const std::vector<LabelId> heads = {0, 1, 2, 1};
  const std::vector<std::string> groups = {"cis", "cis", "cis", "trans"};
  const auto rep = grouped_report(singletons(heads), truth, groups);
  EXPECT_DOUBLE_EQ(rep.overall.top1, 0.75);
  EXPECT_EQ(rep.overall.count, 4u);
  ASSERT_EQ(rep.groups.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.groups.at("cis").top1, 1.0);
  EXPECT_DOUBLE_EQ(rep.groups.at("trans").top1, 0.0);
  EXPECT_EQ(rep.groups.at("trans").count, 1u);
}

TEST(RelativeErrorReduction, Values) {
  EXPECT_NEAR(relative_error_reduction(72.9, 84.2), 11.3 / 27.1, 1e-12);
  EXPECT_NEAR(relative_error_reduction(86.0, 96.6), 10.6 / 14.0, 1e-12);
  EXPECT_EQ(relative_error_reduction(50, 50), 0.0);
  EXPECT_LT(relative_error_reduction(90, 80), 0.0);
  EXPECT_THROW(relative_error_reduction(100, 100), ValidationError);
  EXPECT_THROW(relative_error_reduction(-1, 50), ValidationError);
}

TEST(WctSplit, DeterministicAndLocationDisjoint) {
  const auto images = grid_images(9, 20);
  SplitConfig cfg;
  cfg.seed = 42;
  const auto a = make_wct_split(images, cfg);
  const auto b = make_wct_split(images, cfg);
  EXPECT_EQ(a.entries, b.entries);
  std::map<std::string, std::set<Split>> per_loc;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const bool test = a.entries[i].second == Split::test;
    per_loc[images[i].location_id].insert(test ? Split::test : Split::train);
  }
  std::size_t test_locs = 0;
  for (const auto& [loc, s] : per_loc) {
    EXPECT_EQ(s.size(), 1u) << loc;
    if (s.count(Split::test)) ++test_locs;
  }
  EXPECT_EQ(test_locs, 3u);
  EXPECT_EQ(a.count(Split::test), 60u);
  EXPECT_EQ(a.count(Split::train), 96u);
  EXPECT_EQ(a.count(Split::val), 24u);
  cfg.seed = 43;
  EXPECT_NE(make_wct_split(images, cfg).entries, a.entries);
}

TEST(WctSplit, DevSplitEightyTwenty) {
  // 15 locations of 10 images: 5 test locations leave exactly 100 dev images.
  const auto images = grid_images(15, 10);
  SplitConfig cfg;
  cfg.seed = 7;
  const auto s = make_wct_split(images, cfg);
  EXPECT_EQ(s.count(Split::train), 80u);
  EXPECT_EQ(s.count(Split::val), 20u);
}

TEST(WctSplit, Stratified) {
  const auto images = grid_images(6, 40);
  SplitConfig cfg;
  cfg.stratified = true;
  cfg.seed = 11;
  const auto s = make_wct_split(images, cfg);
  std::map<LabelId, std::pair<int, int>> per_class;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (s.entries[i].second == Split::train) ++per_class[*images[i].gt_label].first;
    if (s.entries[i].second == Split::val) ++per_class[*images[i].gt_label].second;
  }
  for (const auto& [label, c] : per_class) EXPECT_EQ(c.first, static_cast<int>(std::llround((c.first + c.second) * 0.8)));
}

TEST(WctSplit, TooFewLocations) {
  EXPECT_THROW(make_wct_split(grid_images(2, 5), SplitConfig{}), Error);
  SplitConfig bad;
  bad.test_location_fraction = 1.5;
  EXPECT_THROW(make_wct_split(grid_images(5, 5), bad), ValidationError);
}

TEST(SafariSplit, FirstXLocations) {
  auto images = grid_images(12, 3);
  const auto none = make_safari_split(images, 0);
  EXPECT_EQ(none.count(Split::train), 0u);
  const auto all = make_safari_split(images, 12);
  EXPECT_EQ(all.count(Split::test), 0u);
  const auto three = make_safari_split(images, 3);
  // Numeric ordering: 1, 2, 3 rather than 1, 10, 11.
  for (std::size_t i = 0; i < images.size(); ++i) {
    const bool db = std::stoi(images[i].location_id) <= 3;
    EXPECT_EQ(three.entries[i].second == Split::train, db) << images[i].location_id;
  }
  EXPECT_THROW(make_safari_split(images, 13), Error);
}
