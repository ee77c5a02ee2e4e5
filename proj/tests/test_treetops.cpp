// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"

using namespace treecrown;

namespace {

const auto kSe8 = StructuringElement::disk(8);
const auto kSe2 = StructuringElement::disk(2);

Mask everywhere(const Grid& g) { return Mask(g.geometry(), true); }

std::vector<Pixel> pixels_of(const std::vector<TreetopCandidate>& c) {
  std::vector<Pixel> out;
  for (const auto& t : c) out.push_back(t.pixel);
  return out;
}

TreetopCandidate cand(int r, int c, double h, double chi) {
  TreetopCandidate t;
  t.pixel = {r, c};
  t.dsm_height = h;
  t.above_ground = h;
  t.crown_diameter = chi;
  return t;
}

}  // namespace

TEST(Allometry, HandArithmetic) {
  EXPECT_DOUBLE_EQ(allometric_diameter(0.0), 3.09632);
  EXPECT_NEAR(allometric_diameter(10.0), 3.99132, 1e-12);
  EXPECT_NEAR(allometric_diameter(30.0), 11.15132, 1e-12);
  EXPECT_THROW(allometric_diameter(-1.0), InputError);
}

TEST(DetectorKind, ParseAndLabels) {
  EXPECT_EQ(DetectorKind::parse("thr").label(), "TH");
  EXPECT_EQ(DetectorKind::parse("fixed:7").label(), "F_7");
  EXPECT_EQ(DetectorKind::parse("F_19").to_string(), "fixed:19");
  EXPECT_EQ(DetectorKind::parse("SB").label(), "SB");
  EXPECT_THROW(DetectorKind::parse("fixed:4"), ConfigError);
  EXPECT_THROW(DetectorKind::parse("fixed:x"), ConfigError);
  EXPECT_THROW(DetectorKind::parse("watershed"), ConfigError);
}

TEST(Thr, FlatGivesNothing) {
  const Grid g(oracle::square_geometry(30), 3.0);
  EXPECT_TRUE(detect_thr(g, everywhere(g), kSe8, kSe2).empty());
}

TEST(Thr, OneParaboloidOneCandidateAtApex) {
  Grid g(oracle::square_geometry(50), 0.0);
  oracle::add_paraboloid(g, {23, 27}, 12.0, 10.0);
  const auto c = detect_thr(g, everywhere(g), kSe8, kSe2);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].pixel, (Pixel{23, 27}));
  EXPECT_DOUBLE_EQ(c[0].dsm_height, 12.0);
}

TEST(Thr, ThinSaddleSplitByOpening) {
  Grid g(GridGeometry{60, 30, 1.0, 0, 0}, 0.0);
  oracle::add_paraboloid(g, {15, 12}, 10.0, 7.0);
  oracle::add_paraboloid(g, {15, 47}, 9.0, 7.0);
  for (int c = 12; c <= 47; ++c) g(15, c) = std::max(g(15, c), 2.0);

  // Without splitting, the positive region is one component.
  const Grid thr = top_hat_reconstruction(g, kSe8);
  Mask pos(g.geometry());
  for (std::size_t i = 0; i < thr.size(); ++i) pos.set(i, thr[i] > 1e-6);
  int n = 0;
  label_components(pos, Connectivity::Eight, &n);
  ASSERT_EQ(n, 1);

  const auto c = detect_thr(g, everywhere(g), kSe8, kSe2);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].pixel, (Pixel{15, 12}));
  EXPECT_EQ(c[1].pixel, (Pixel{15, 47}));
}

TEST(Thr, NonVegetationDropped) {
  Grid g(oracle::square_geometry(40), 0.0);
  oracle::add_paraboloid(g, {20, 20}, 8.0, 6.0);
  Mask veg(g.geometry(), true);
  veg.set(20, 20, false);
  EXPECT_TRUE(detect_thr(g, veg, kSe8, kSe2).empty());
}

TEST(Thr, TieBreaksTowardRasterOrder) {
  Grid g(oracle::square_geometry(30), 0.0);
  for (int r = 12; r <= 17; ++r)
    for (int c = 12; c <= 17; ++c) g(r, c) = 5.0;
  const auto c = detect_thr(g, everywhere(g), kSe8, kSe2);
  ASSERT_EQ(c.size(), 1u);
  // The disk opening trims the plateau corners; (12, 14) is the first
  // surviving cell in raster order.
  EXPECT_EQ(c[0].pixel, (Pixel{12, 14}));
}

TEST(FixedWindow, SpikeAndRamp) {
  Grid spike(oracle::square_geometry(15), 0.0);
  spike(7, 3) = 1.0;
  for (int size : {3, 7, 19}) {
    const auto c = detect_fixed_window(spike, everywhere(spike), size);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].pixel, (Pixel{7, 3}));
  }
  Grid ramp(oracle::square_geometry(12), 0.0);
  for (int r = 0; r < 12; ++r)
    for (int col = 0; col < 12; ++col) ramp(r, col) = r * 12 + col;
  const auto c = detect_fixed_window(ramp, everywhere(ramp), 3);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].pixel, (Pixel{11, 11}));
  EXPECT_THROW(detect_fixed_window(ramp, everywhere(ramp), 4), InputError);
}

TEST(FixedWindow, MatchesExhaustiveScan) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Grid g = trial % 2 ? oracle::random_level_grid(rng, 32, 32, 6) : oracle::random_grid(rng, 32, 32);
    if (trial % 5 == 0)
      for (int k = 0; k < 10; ++k) g[rng() % g.size()] = g.nodata();
    Mask veg(g.geometry());
    for (std::size_t i = 0; i < veg.size(); ++i) veg.set(i, rng() % 4 != 0);
    for (int size : {3, 7, 11}) {
      EXPECT_EQ(pixels_of(detect_fixed_window(g, veg, size)), oracle::fixed_window_maxima(g, veg, size))
          << "trial " << trial << " size " << size;
    }
  }
}

TEST(SlopeBreak, FlatGivesNothing) {
  const Grid g(oracle::square_geometry(20), 1.0);
  EXPECT_TRUE(detect_slope_break(g, everywhere(g)).empty());
}

TEST(SlopeBreak, ParaboloidApexKept) {
  Grid g(oracle::square_geometry(60), 0.0);
  oracle::add_paraboloid(g, {30, 30}, 10.0, 9.0);
  // A distant, higher bump must not be inside the apex window.
  oracle::add_paraboloid(g, {30, 52}, 15.0, 4.0);
  const auto c = detect_slope_break(g, everywhere(g));
  std::set<Pixel> got;
  for (const auto& t : c) got.insert(t.pixel);
  EXPECT_TRUE(got.count({30, 30}));
  EXPECT_TRUE(got.count({30, 52}));
}

TEST(SlopeBreak, EqualAdjacentPeaksBothKept) {
  Grid g(GridGeometry{40, 20, 1.0, 0, 0}, 0.0);
  oracle::add_paraboloid(g, {10, 14}, 10.0, 6.0);
  oracle::add_paraboloid(g, {10, 24}, 10.0, 6.0);
  const auto c = detect_slope_break(g, everywhere(g));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].pixel, (Pixel{10, 14}));
  EXPECT_EQ(c[1].pixel, (Pixel{10, 24}));
}

TEST(SlopeBreak, ToleranceWidensTheWindow) {
  // A cone with one slightly higher pixel two steps east of the apex. With no
  // tolerance the east transect breaks right away and the apex survives; a
  // 0.5 tolerance walks past the small rise, the window grows to the border
  // and swallows the higher pixel.
  Grid g(oracle::square_geometry(21), 0.0);
  for (int r = 0; r < 21; ++r)
    for (int c = 0; c < 21; ++c) g(r, c) = 5.0 - 0.1 * std::hypot(r - 10.0, c - 10.0);
  g(10, 12) = 5.2;
  const auto has_apex = [](const std::vector<TreetopCandidate>& v) {
    return std::any_of(v.begin(), v.end(), [](const auto& t) { return t.pixel == Pixel{10, 10}; });
  };
  EXPECT_TRUE(has_apex(detect_slope_break(g, everywhere(g), {0.0})));
  EXPECT_FALSE(has_apex(detect_slope_break(g, everywhere(g), {0.5})));
}

TEST(HeightFilter, ThresholdAndBoundary) {
  Grid g(GridGeometry{5, 1, 1.0, 0, 0}, std::vector<double>{0.0, 1.5, 2.0, 0.0, 9.0}, -9999.0);
  Mask t(g.geometry());
  t.set(0, true);
  t.set(3, true);
  std::vector<TreetopCandidate> in{cand(0, 1, 1.5, 0), cand(0, 2, 2.0, 0), cand(0, 4, 9.0, 0)};
  const auto out = height_filter(in, g, t, HeightMode::dtm(), 2.0, 5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].pixel.col, 2);
  EXPECT_DOUBLE_EQ(out[1].above_ground, 9.0);
  EXPECT_DOUBLE_EQ(out[1].crown_diameter, allometric_diameter(9.0));
  const auto constant = height_filter(in, g, t, HeightMode::constant(10.0), 2.0, 5);
  EXPECT_EQ(constant.size(), in.size());
}

TEST(Nms, RuleExamples) {
  const GridGeometry geo{20, 20, 0.3, 0, 0};
  EXPECT_EQ(non_max_suppress({cand(5, 5, 10, 4)}, geo).size(), 1u);
  const auto two = non_max_suppress({cand(5, 6, 9, 4), cand(5, 5, 10, 4)}, geo);
  ASSERT_EQ(two.size(), 1u);
  EXPECT_DOUBLE_EQ(two[0].dsm_height, 10.0);
  EXPECT_EQ(two[0].id, 1);
  EXPECT_EQ(non_max_suppress({cand(2, 2, 9, 1), cand(17, 17, 10, 1)}, geo).size(), 2u);
}

TEST(Nms, WindowSideIsOddCeiling) {
  EXPECT_EQ(nms_window_side(3.0, 0.3), 11);
  EXPECT_EQ(nms_window_side(3.3, 0.3), 11);
  EXPECT_EQ(nms_window_side(3.31, 0.3), 13);
  EXPECT_EQ(nms_window_side(0.1, 0.3), 1);
}

TEST(Nms, EachCandidateUsesItsOwnWindow) {
  const GridGeometry geo{30, 30, 1.0, 0, 0};
  // The lower candidate has a small window that does not reach the taller one.
  const auto out = non_max_suppress({cand(10, 10, 20, 9), cand(10, 15, 5, 3)}, geo);
  EXPECT_EQ(out.size(), 2u);
}

TEST(Nms, MissingDiameterIsInputError) {
  TreetopCandidate t = cand(1, 1, 3, 0);
  t.crown_diameter = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(non_max_suppress({t}, GridGeometry{3, 3, 1, 0, 0}), InputError);
}

TEST(TreetopCsv, RoundTrip) {
  const GridGeometry geo{10, 10, 0.5, 100, 200};
  std::vector<TreetopCandidate> tops{cand(1, 2, 12.5, 4.5), cand(7, 3, 8.25, 3.7)};
  tops[0].id = 1;
  tops[1].id = 2;
  tops[1].above_ground = std::numeric_limits<double>::quiet_NaN();
  const std::string csv = format_treetops_csv(tops, geo);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,row,col,x,y,dsm_height,above_ground,crown_diameter");
  const auto back = parse_treetops_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].pixel, (Pixel{7, 3}));
  EXPECT_DOUBLE_EQ(back[0].crown_diameter, 4.5);
  EXPECT_TRUE(std::isnan(back[1].above_ground));
  EXPECT_THROW(parse_treetops_csv("row,col\n1,2\n"), InputError);
  EXPECT_THROW(parse_treetops_csv("id,row,col,x,y,dsm_height,above_ground,crown_diameter\n1,2\n"), InputError);
}
