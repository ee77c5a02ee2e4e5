// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "oracles.hpp"

using namespace treecrown;

namespace {

MultibandRaster two_bands(const Grid& red, const Grid& nir) {
  MultibandRaster m;
  m.add_band(red);
  m.add_band(nir);
  m.assign_role("RED", 0);
  m.assign_role("NIR", 1);
  return m;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("treecrown_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Geometry, RejectsNonPositiveDimensions) {
  EXPECT_THROW(Grid(GridGeometry{0, 3, 1.0, 0, 0}), InputError);
  EXPECT_THROW(Grid(GridGeometry{3, 3, 0.0, 0, 0}), InputError);
  EXPECT_THROW(Grid(GridGeometry{2, 2, 1.0, 0, 0}, std::vector<double>(3), -9999.0), InputError);
}

TEST(Geometry, PixelCenterWorldCoordinates) {
  const GridGeometry g{4, 3, 0.5, 100.0, 200.0};
  EXPECT_DOUBLE_EQ(g.x_of(0), 100.25);
  EXPECT_DOUBLE_EQ(g.y_of(0), 201.25);  // row 0 is the northernmost row
  EXPECT_DOUBLE_EQ(g.y_of(2), 200.25);
  EXPECT_DOUBLE_EQ(g.col_of(g.x_of(3)), 3.0);
  EXPECT_DOUBLE_EQ(g.row_of(g.y_of(1)), 1.0);
}

TEST(Grid, NodataExcludedFromReductions) {
  Grid g(GridGeometry{3, 1, 1.0, 0, 0}, std::vector<double>{5.0, -9999.0, 2.0}, -9999.0);
  auto mm = g.min_max();
  ASSERT_TRUE(mm);
  EXPECT_EQ(mm->first, 2.0);
  EXPECT_EQ(mm->second, 5.0);
  EXPECT_EQ(g.valid_count(), 2u);
  Grid all_missing(GridGeometry{2, 1, 1.0, 0, 0}, -9999.0, -9999.0);
  EXPECT_FALSE(all_missing.min_max());
}

TEST(Ndvi, SymmetricBandsGiveZero) {
  const GridGeometry geo{4, 4, 1.0, 0, 0};
  const Grid n = ndvi(two_bands(Grid(geo, 0.4), Grid(geo, 0.4)));
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_EQ(n[i], 0.0);
}

TEST(Ndvi, HandArithmetic) {
  const GridGeometry geo{2, 2, 1.0, 0, 0};
  const Grid n = ndvi(two_bands(Grid(geo, 0.2), Grid(geo, 0.6)));
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_DOUBLE_EQ(n[i], 0.5);
}

TEST(Ndvi, ZeroSumAndNodataBecomeNodata) {
  const GridGeometry geo{2, 1, 1.0, 0, 0};
  Grid red(geo, 0.0), nir(geo, 0.0);
  red[1] = -9999.0;
  const Grid n = ndvi(two_bands(red, nir));
  EXPECT_TRUE(n.is_nodata(0));
  EXPECT_TRUE(n.is_nodata(1));
}

TEST(Ndvi, MissingRoleIsConfigError) {
  MultibandRaster m;
  m.add_band(Grid(GridGeometry{2, 2, 1.0, 0, 0}, 0.3));
  m.assign_role("RED", 0);
  EXPECT_THROW(ndvi(m), ConfigError);
  EXPECT_THROW(m.assign_role("NIR", 3), ConfigError);
}

TEST(Multiband, BandGeometryMustMatch) {
  MultibandRaster m;
  m.add_band(Grid(GridGeometry{2, 2, 1.0, 0, 0}));
  EXPECT_THROW(m.add_band(Grid(GridGeometry{2, 2, 0.5, 0, 0})), InputError);
}

TEST(VegetationMask, StrictThreshold) {
  const GridGeometry geo{3, 3, 1.0, 0, 0};
  EXPECT_EQ(vegetation_mask(Grid(geo, 0.5), 0.3).count(), 9u);
  EXPECT_EQ(vegetation_mask(Grid(geo, 0.3), 0.3).count(), 0u);
}

TEST(VegetationMask, Checkerboard) {
  const GridGeometry geo{6, 5, 1.0, 0, 0};
  Grid n(geo);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 6; ++c) n(r, c) = (r + c) % 2 ? 0.5 : 0.1;
  const Mask m = vegetation_mask(n, 0.3);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 6; ++c) EXPECT_EQ(m(r, c), (r + c) % 2 == 1);
}

TEST(VegetationMask, NodataNeverVegetation) {
  Grid n(GridGeometry{2, 1, 1.0, 0, 0}, std::vector<double>{-9999.0, 0.9}, -9999.0);
  const Mask m = vegetation_mask(n, -1.0);
  EXPECT_FALSE(m[0]);
  EXPECT_TRUE(m[1]);
}

TEST(AsciiGrid, RoundTripIsBitExact) {
  std::mt19937_64 rng(7);
  Grid g = oracle::random_grid(rng, 13, 9, -1e3, 1e3);
  g[5] = -9999.0;
  g[7] = 1e-300;
  g[8] = 0.1 + 0.2;
  const Grid back = io::parse_ascii_grid(io::format_ascii_grid(g));
  ASSERT_EQ(back.geometry(), g.geometry());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.is_nodata(i)) {
      EXPECT_TRUE(back.is_nodata(i));
    } else {
      EXPECT_EQ(std::memcmp(&g[i], &back[i], sizeof(double)), 0) << i;
    }
  }
}

TEST(AsciiGrid, CenterOriginHeader) {
  const Grid g = io::parse_ascii_grid("ncols 2\nnrows 1\nxllcenter 10\nyllcenter 20\ncellsize 2\n1 2\n");
  EXPECT_DOUBLE_EQ(g.geometry().xll, 9.0);
  EXPECT_DOUBLE_EQ(g.geometry().yll, 19.0);
  EXPECT_EQ(g.nodata(), -9999.0);
}

TEST(AsciiGrid, MalformedInputsAreInputErrors) {
  EXPECT_THROW(io::parse_ascii_grid("ncols 2\nnrows 1\ncellsize 1\n1 2\n"), InputError);
  EXPECT_THROW(io::parse_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n"), InputError);
  EXPECT_THROW(io::parse_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n"), InputError);
  EXPECT_THROW(io::parse_ascii_grid("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n"), InputError);
}

TEST(Manifest, WriteReadRoundTrip) {
  const auto dir = temp_dir("manifest");
  const GridGeometry geo{3, 2, 0.3, 5.0, 6.0};
  MultibandRaster m;
  for (int b = 0; b < 3; ++b) m.add_band(Grid(geo, 0.1 * (b + 1)));
  m.assign_role("RED", 0);
  m.assign_role("NIR", 2);
  io::write_multiband(dir / "bands.manifest", m);
  const MultibandRaster back = io::read_multiband(dir / "bands.manifest");
  ASSERT_EQ(back.band_count(), 3u);
  EXPECT_EQ(back.geometry(), geo);
  EXPECT_EQ(*back.role("NIR"), 2u);
  EXPECT_DOUBLE_EQ(back.band(1)[0], 0.2);
}

TEST(Manifest, BadRoleLine) {
  EXPECT_THROW(io::parse_manifest("a.asc\nRED=x\n", "."), ConfigError);
  const auto m = io::parse_manifest("# comment\n a.asc \nred = 0\n", "/data");
  ASSERT_EQ(m.bands.size(), 1u);
  EXPECT_EQ(m.bands[0], std::filesystem::path("/data/a.asc"));
  EXPECT_EQ(m.roles[0].first, "RED");
}

TEST(Manifest, MissingFileIsInputError) {
  EXPECT_THROW(io::read_multiband("/nonexistent/bands.manifest"), InputError);
}
