// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "oracles.hpp"

using namespace treecrown;

namespace {

SceneSpec small_spec(Density d = Density::Sparse) {
  SceneSpec s;
  s.width = d == Density::Urban ? 320 : 160;
  s.height = d == Density::Urban ? 300 : 140;
  s.n_trees = 8;
  s.density = d;
  return s;
}

std::string slurp_all(const std::filesystem::path& dir) {
  std::string all;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += f.filename().string() + "\n" + io::read_text(f);
  return all;
}

}  // namespace

TEST(Synth, NoTreesMeansSurfaceEqualsTerrain) {
  SceneSpec s = small_spec();
  s.n_trees = 0;
  s.n_grass = 0;
  s.noise_sigma = 0.0;
  const Scene scene = generate_scene(s);
  EXPECT_TRUE(scene.trees.empty());
  EXPECT_TRUE(scene.truth_crowns.empty());
  for (std::size_t i = 0; i < scene.dsm.size(); ++i) ASSERT_EQ(scene.dsm[i], scene.terrain[i]);
}

TEST(Synth, SameSeedSameBytes) {
  const auto base = std::filesystem::temp_directory_path() / "treecrown_test_synth";
  std::filesystem::remove_all(base);
  for (const Density d : {Density::Sparse, Density::Dense, Density::Urban}) {
    SceneSpec s = small_spec(d);
    write_scene(generate_scene(s), base / "a");
    write_scene(generate_scene(s), base / "b");
    EXPECT_EQ(slurp_all(base / "a"), slurp_all(base / "b"));
    s.seed = 43;
    write_scene(generate_scene(s), base / "c");
    EXPECT_NE(slurp_all(base / "a"), slurp_all(base / "c"));
    std::filesystem::remove_all(base);
  }
}

TEST(Synth, ApexIsUniqueMaximumOfItsCrown) {
  for (const Density d : {Density::Sparse, Density::Dense, Density::Urban}) {
    SceneSpec s = d == Density::Dense ? dense_scene_spec() : small_spec(d);
    s.noise_sigma = 0.0;
    const Scene scene = generate_scene(s);
    ASSERT_EQ(scene.truth_crowns.size(), scene.trees.size());
    for (std::size_t k = 0; k < scene.trees.size(); ++k) {
      const Pixel apex = scene.trees[k].apex;
      const auto& px = scene.truth_crowns[k].pixels;
      ASSERT_NE(std::find(px.begin(), px.end(), apex), px.end()) << "tree " << k;
      for (const Pixel& p : px)
        if (p != apex) {
          ASSERT_LT(scene.dsm(p), scene.dsm(apex)) << "tree " << k;
        }
    }
  }
}

TEST(Synth, TruthCanopyHeightsWithinRange) {
  const Scene scene = generate_scene(small_spec());
  for (std::size_t k = 0; k < scene.trees.size(); ++k) {
    EXPECT_GE(scene.trees[k].height, scene.spec.height_min);
    EXPECT_LE(scene.trees[k].height, scene.spec.height_max);
    EXPECT_NEAR(2.0 * scene.trees[k].radius, allometric_diameter(scene.trees[k].height), 1e-9);
    EXPECT_EQ(scene.truth_tops[k].id, static_cast<int>(k) + 1);
    EXPECT_EQ(scene.truth_tops[k].pixel, scene.trees[k].apex);
  }
}

TEST(Synth, SpectralClasses) {
  const Scene scene = generate_scene(small_spec(Density::Urban));
  const Grid n = ndvi(scene.raster);
  double tree = 0, soil = 0, roof = 0;
  int nt = 0, ns = 0, nr = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const Pixel p = n.geometry().pixel_of(i);
    if (scene.truth_labels[i] > 0) {
      tree += n[i];
      ++nt;
      continue;
    }
    bool on_roof = false, green = false;
    for (const auto& r : scene.roofs)
      if (p.row >= r.row0 && p.row <= r.row1 && p.col >= r.col0 && p.col <= r.col1) {
        on_roof = true;
        green = r.green;
      }
    if (on_roof && !green) {
      roof += n[i];
      ++nr;
    } else if (!on_roof && scene.ground[i] && n[i] < 0.3) {
      soil += n[i];
      ++ns;
    }
  }
  ASSERT_GT(nt, 0);
  ASSERT_GT(ns, 0);
  EXPECT_NEAR(tree / nt, 0.7, 0.05);
  EXPECT_NEAR(soil / ns, 0.1, 0.05);
  if (nr > 0) {
    EXPECT_NEAR(roof / nr, 0.0, 0.05);
  }
}

TEST(Synth, UrbanScenesHaveRoofs) {
  EXPECT_EQ(generate_scene(small_spec(Density::Urban)).roofs.size(), 8u);
  EXPECT_TRUE(generate_scene(small_spec()).roofs.empty());
}

TEST(Synth, NoiselessSparseCandidatesHitEveryApex) {
  PipelineConfig c;
  c.scene = sparse_scene_spec();
  c.scene->noise_sigma = 0.0;
  const PipelineInputs in = load_inputs(c);
  const PipelineResult res = run_detection(c, in);
  std::set<Pixel> found;
  for (const auto& t : res.candidates) found.insert(t.pixel);
  ASSERT_EQ(in.scene->trees.size(), 50u);
  for (const auto& t : in.scene->trees) EXPECT_TRUE(found.contains(t.apex)) << t.apex.row << "," << t.apex.col;
  EXPECT_EQ(res.candidates.size(), 50u);
}

TEST(Synth, InfeasiblePlacementIsGenerationError) {
  SceneSpec s = small_spec();
  s.n_trees = 500;
  EXPECT_THROW(generate_scene(s), GenerationError);
  s = small_spec();
  s.width = s.height = 8;
  EXPECT_THROW(generate_scene(s), GenerationError);
  s.n_trees = -1;
  EXPECT_THROW(generate_scene(s), ConfigError);
}

TEST(Synth, TruthCrownsRoundTripThroughGeoJson) {
  const Scene scene = generate_scene(small_spec(Density::Dense));
  const GridGeometry& geo = scene.dsm.geometry();
  const auto back = parse_crowns_geojson(format_crowns_geojson(scene.truth_crowns, geo), geo);
  ASSERT_EQ(back.size(), scene.truth_crowns.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    auto want = scene.truth_crowns[k].pixels;
    std::sort(want.begin(), want.end());
    EXPECT_EQ(back[k].pixels, want);
    EXPECT_EQ(back[k].id, scene.truth_crowns[k].id);
  }
}

TEST(Synth, DensityParsing) {
  EXPECT_EQ(parse_density("DENSE"), Density::Dense);
  EXPECT_EQ(to_string(Density::Urban), "urban");
  EXPECT_THROW(parse_density("forest"), ConfigError);
}
