// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic scenes: a smooth terrain, paraboloid tree crowns
// sized by the allometric relation, optional flat roofs and grass patches,
// eight co-registered spectral bands, and the exact ground truth.
//
// Every random draw goes through Rng below, built on the 64-bit Mersenne
// Twister with fixed transforms, so a given spec always yields the same
// bytes with a given math library.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "treecrown/error.hpp"
#include "treecrown/io.hpp"
#include "treecrown/polygon.hpp"
#include "treecrown/raster.hpp"
#include "treecrown/treetops.hpp"

namespace treecrown {

enum class Density { Sparse, Dense, Urban };

inline std::string to_string(Density d) {
  switch (d) {
    case Density::Sparse: return "sparse";
    case Density::Dense: return "dense";
    case Density::Urban: return "urban";
  }
  return "sparse";
}

inline Density parse_density(const std::string& text) {
  const std::string t = io::lower(text);
  if (t == "sparse") return Density::Sparse;
  if (t == "dense") return Density::Dense;
  if (t == "urban") return Density::Urban;
  throw ConfigError("unknown density mode '" + text + "'");
}

class GenerationError : public InputError {
 public:
  using InputError::InputError;
};

struct SceneSpec {
  int width = 512;
  int height = 512;
  double cell_size = 0.3;
  int n_trees = 50;
  Density density = Density::Sparse;
  double height_min = 12.0;  // apex above ground, meters
  double height_max = 20.0;
  double terrain_amplitude = 2.0;  // peak-to-peak of the undulation, meters
  double terrain_slope_deg = 0.0;
  double noise_sigma = 0.15;  // DSM noise, meters
  std::uint64_t seed = 42;
  double max_overlap = 0.4;   // Dense: allowed fraction of r1 + r2 shared by two crowns
  int n_roofs = -1;           // -1: 8 in Urban, 0 otherwise
  int n_grass = 6;            // low vegetation patches
  double spectral_noise = 0.002;

  int roof_count() const { return n_roofs >= 0 ? n_roofs : (density == Density::Urban ? 8 : 0); }

  void validate() const {
    if (width < 8 || height < 8) throw ConfigError("scene must be at least 8 x 8 pixels");
    if (!(cell_size > 0.0)) throw ConfigError("scene cell_size must be > 0");
    if (n_trees < 0) throw ConfigError("n_trees must be >= 0");
    if (!(height_min > 0.0) || !(height_max >= height_min)) throw ConfigError("bad tree height range");
    if (!(terrain_amplitude >= 0.0)) throw ConfigError("terrain_amplitude must be >= 0");
    if (!(terrain_slope_deg >= 0.0 && terrain_slope_deg < 60.0)) throw ConfigError("terrain_slope_deg must lie in [0, 60)");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
    if (!(max_overlap >= 0.0 && max_overlap < 1.0)) throw ConfigError("max_overlap must lie in [0, 1)");
    if (n_grass < 0) throw ConfigError("n_grass must be >= 0");
    if (!(spectral_noise >= 0.0)) throw ConfigError("spectral_noise must be >= 0");
  }
};

// Mersenne Twister with platform-independent uniform and normal transforms
// (the standard distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct SceneTree {
  Pixel apex;
  double height = 0.0;   // above ground at the apex
  double radius = 0.0;   // meters
  double ground = 0.0;   // terrain height at the apex
  std::array<double, 8> spectrum{};
};

struct SceneRoof {
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // inclusive pixel bounds
  double height = 0.0;                          // above the terrain minimum under it
  bool green = false;
};

struct Scene {
  SceneSpec spec;
  Grid dsm;
  Grid terrain;  // noise-free bare earth
  MultibandRaster raster;
  std::vector<SceneTree> trees;
  std::vector<SceneRoof> roofs;
  std::vector<TreetopCandidate> truth_tops;  // ids 1..n, same order as trees
  std::vector<CrownRecord> truth_crowns;     // pixels where each tree is the visible surface
  LabelGrid truth_labels;                    // tree id per pixel, 0 elsewhere
  Mask ground;                               // cells showing bare earth or grass
};

namespace synth_detail {

constexpr std::array<double, 8> kSoil{0.08, 0.10, 0.13, 0.16, 0.19, 0.21, 0.23, 0.24};
constexpr std::array<double, 8> kTree{0.03, 0.04, 0.08, 0.07, 0.05, 0.18, 0.30, 0.31};
constexpr std::array<double, 8> kGrass{0.04, 0.05, 0.10, 0.09, 0.07, 0.20, 0.30, 0.31};

inline double tree_surface(const SceneTree& t, double dr_m, double dc_m) {
  const double d2 = dr_m * dr_m + dc_m * dc_m;
  const double r2 = t.radius * t.radius;
  if (d2 > r2) return -std::numeric_limits<double>::infinity();
  return t.ground + t.height * (1.0 - d2 / r2);
}

}  // namespace synth_detail

inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  using namespace synth_detail;
  const GridGeometry geo{spec.width, spec.height, spec.cell_size, 0.0, 0.0};
  const double cs = spec.cell_size;
  const double lx = spec.width * cs, ly = spec.height * cs;

  Scene scene;
  scene.spec = spec;
  scene.terrain = Grid(geo, 0.0);

  // Terrain: base level, a tilted plane and two low-frequency undulations.
  const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double slope = std::tan(spec.terrain_slope_deg * std::numbers::pi / 180.0);
  const double f1 = rng.uniform(0.5, 1.5), f2 = rng.uniform(0.5, 1.5), f3 = rng.uniform(1.0, 2.0);
  const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi), p2 = rng.uniform(0.0, 2.0 * std::numbers::pi),
               p3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int r = 0; r < spec.height; ++r) {
    const double y = (r + 0.5) * cs;
    for (int c = 0; c < spec.width; ++c) {
      const double x = (c + 0.5) * cs;
      const double wave = std::sin(2.0 * std::numbers::pi * f1 * x / lx + p1) *
                              std::cos(2.0 * std::numbers::pi * f2 * y / ly + p2) +
                          0.5 * std::sin(2.0 * std::numbers::pi * f3 * (x + y) / (lx + ly) + p3);
      const double tilt = slope * ((x - 0.5 * lx) * std::cos(azimuth) + (y - 0.5 * ly) * std::sin(azimuth));
      scene.terrain(r, c) = 20.0 + spec.terrain_amplitude * wave / 3.0 + tilt;
    }
  }

  // Roofs, placed first so trees can keep clear of them.
  const int n_roofs = spec.roof_count();
  for (int k = 0; k < n_roofs; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const int h = static_cast<int>(std::lround(rng.uniform(8.0, 18.0) / cs));
      const int w = static_cast<int>(std::lround(rng.uniform(8.0, 18.0) / cs));
      if (h + 4 >= spec.height || w + 4 >= spec.width) break;
      SceneRoof roof;
      roof.row0 = rng.uniform_int(2, spec.height - h - 2);
      roof.col0 = rng.uniform_int(2, spec.width - w - 2);
      roof.row1 = roof.row0 + h - 1;
      roof.col1 = roof.col0 + w - 1;
      roof.height = rng.uniform(4.0, 9.0);
      roof.green = rng.uniform() < 0.25;
      const int gap = static_cast<int>(std::ceil(2.0 / cs));
      bool clash = false;
      for (const auto& o : scene.roofs) {
        if (roof.row0 - gap <= o.row1 && o.row0 <= roof.row1 + gap && roof.col0 - gap <= o.col1 &&
            o.col0 <= roof.col1 + gap)
          clash = true;
      }
      if (clash) continue;
      scene.roofs.push_back(roof);
      placed = true;
    }
    if (!placed) throw GenerationError("could not place roof " + std::to_string(k + 1));
  }
  auto roof_distance_ok = [&](Pixel p, double radius_px) {
    for (const auto& o : scene.roofs) {
      const double dr = std::max({0.0, double(o.row0 - p.row), double(p.row - o.row1)});
      const double dc = std::max({0.0, double(o.col0 - p.col), double(p.col - o.col1)});
      if (std::sqrt(dr * dr + dc * dc) < radius_px + 2.0) return false;
    }
    return true;
  };

  // Trees.
  auto visible_margin_ok = [](const SceneTree& a, const SceneTree& b, double cs_m) {
    // a's apex must stay at least 0.5 m above b's surface, and vice versa.
    const double dr = (a.apex.row - b.apex.row) * cs_m, dc = (a.apex.col - b.apex.col) * cs_m;
    return synth_detail::tree_surface(b, dr, dc) < a.ground + a.height - 0.5 &&
           synth_detail::tree_surface(a, -dr, -dc) < b.ground + b.height - 0.5;
  };
  for (int k = 0; k < spec.n_trees; ++k) {
    bool placed = false;
    const double h = rng.uniform(spec.height_min, spec.height_max);
    const double radius = allometric_diameter(h) / 2.0;
    const double radius_px = radius / cs;
    const int margin = static_cast<int>(std::ceil(radius_px)) + 1;
    if (2 * margin >= spec.width || 2 * margin >= spec.height) throw GenerationError("scene too small for tree crowns");
    for (int attempt = 0; attempt < 20000 && !placed; ++attempt) {
      SceneTree t;
      t.apex = {rng.uniform_int(margin, spec.height - 1 - margin), rng.uniform_int(margin, spec.width - 1 - margin)};
      t.height = h;
      t.radius = radius;
      t.ground = scene.terrain(t.apex);
      if (!roof_distance_ok(t.apex, radius_px)) continue;
      bool ok = true;
      for (const auto& o : scene.trees) {
        const double d = std::hypot(double(t.apex.row - o.apex.row), double(t.apex.col - o.apex.col));
        const double sum = radius_px + o.radius / cs;
        if (spec.density == Density::Dense) {
          if (d < (1.0 - spec.max_overlap) * sum || !visible_margin_ok(t, o, cs)) ok = false;
        } else if (d < sum + 2.0) {
          ok = false;
        }
        if (!ok) break;
      }
      if (!ok) continue;
      const double brightness = rng.uniform(0.9, 1.1);
      for (std::size_t b = 0; b < 8; ++b) t.spectrum[b] = kTree[b] * brightness * rng.uniform(0.95, 1.05);
      scene.trees.push_back(t);
      placed = true;
    }
    if (!placed) throw GenerationError("could not place tree " + std::to_string(k + 1) + " of " + std::to_string(spec.n_trees));
  }

  // Grass patches: circles of low vegetation with a smooth texture.
  struct Patch {
    double row, col, radius_px;
  };
  std::vector<Patch> patches;
  for (int k = 0; k < spec.n_grass; ++k) {
    const double row = rng.uniform(0.0, spec.height - 1.0);
    const double col = rng.uniform(0.0, spec.width - 1.0);
    patches.push_back({row, col, rng.uniform(4.0, 12.0) / cs});
  }

  // Surfaces. Trees are rasterized over their bounding boxes only.
  const double ninf = -std::numeric_limits<double>::infinity();
  Grid surface = scene.terrain;
  scene.truth_labels = LabelGrid(geo, 0, -1);
  std::vector<std::uint8_t> cls(geo.size(), 0);  // 0 soil, 1 grass, 2 roof, 3 green roof, 4 tree
  std::vector<double> shade(geo.size(), 1.0);
  for (std::size_t i = 0; i < geo.size(); ++i) {
    const Pixel px = geo.pixel_of(i);
    for (const auto& p : patches)
      if (std::hypot(px.row - p.row, px.col - p.col) <= p.radius_px) cls[i] = 1;
  }
  for (std::size_t k = 0; k < scene.roofs.size(); ++k) {
    const auto& roof = scene.roofs[k];
    double base = std::numeric_limits<double>::infinity();
    for (int r = roof.row0; r <= roof.row1; ++r)
      for (int c = roof.col0; c <= roof.col1; ++c) base = std::min(base, scene.terrain(r, c));
    for (int r = roof.row0; r <= roof.row1; ++r) {
      for (int c = roof.col0; c <= roof.col1; ++c) {
        surface(r, c) = base + roof.height;
        cls[geo.index(r, c)] = roof.green ? 3 : 2;
      }
    }
  }
  std::vector<double> best(geo.size(), ninf);
  for (std::size_t k = 0; k < scene.trees.size(); ++k) {
    const SceneTree& t = scene.trees[k];
    const int span = static_cast<int>(std::ceil(t.radius / cs));
    for (int r = std::max(0, t.apex.row - span); r <= std::min(spec.height - 1, t.apex.row + span); ++r) {
      for (int c = std::max(0, t.apex.col - span); c <= std::min(spec.width - 1, t.apex.col + span); ++c) {
        const double dr = (r - t.apex.row) * cs, dc = (c - t.apex.col) * cs;
        const double z = tree_surface(t, dr, dc);
        const std::size_t i = geo.index(r, c);
        if (z <= surface[i] || z <= best[i]) continue;
        best[i] = z;
        scene.truth_labels[i] = static_cast<std::int32_t>(k) + 1;
        const double d = std::sqrt(dr * dr + dc * dc);
        const double grad = 2.0 * t.height * d / (t.radius * t.radius);
        shade[i] = 0.7 + 0.3 / std::sqrt(1.0 + grad * grad);
      }
    }
  }
  scene.ground = Mask(geo);
  for (std::size_t i = 0; i < geo.size(); ++i) {
    if (scene.truth_labels[i] > 0) {
      surface[i] = best[i];
      cls[i] = 4;
    }
    scene.ground.set(i, cls[i] <= 1);
  }

  // Truth, recorded before any noise.
  for (std::size_t k = 0; k < scene.trees.size(); ++k) {
    const SceneTree& t = scene.trees[k];
    TreetopCandidate top;
    top.id = static_cast<int>(k) + 1;
    top.pixel = t.apex;
    top.dsm_height = surface(t.apex);
    top.above_ground = t.height;
    top.crown_diameter = 2.0 * t.radius;
    scene.truth_tops.push_back(top);
    scene.truth_crowns.push_back({top.id, {}, top.dsm_height});
  }
  for (std::size_t i = 0; i < geo.size(); ++i)
    if (scene.truth_labels[i] > 0)
      scene.truth_crowns[static_cast<std::size_t>(scene.truth_labels[i] - 1)].pixels.push_back(geo.pixel_of(i));

  // Observations.
  scene.dsm = Grid(geo, 0.0);
  for (std::size_t i = 0; i < geo.size(); ++i) scene.dsm[i] = surface[i] + spec.noise_sigma * rng.normal();

  std::array<Grid, 8> bands;
  for (auto& b : bands) b = Grid(geo, 0.0);
  std::vector<std::array<double, 8>> roof_spectra;
  for (const auto& roof : scene.roofs) {
    std::array<double, 8> s{};
    const double level = rng.uniform(0.22, 0.25);
    for (std::size_t b = 0; b < 8; ++b) s[b] = roof.green ? kGrass[b] * rng.uniform(0.97, 1.03) : level;
    roof_spectra.push_back(s);
  }
  std::vector<int> roof_of(geo.size(), -1);
  for (std::size_t k = 0; k < scene.roofs.size(); ++k) {
    const auto& roof = scene.roofs[k];
    for (int r = roof.row0; r <= roof.row1; ++r)
      for (int c = roof.col0; c <= roof.col1; ++c) roof_of[geo.index(r, c)] = static_cast<int>(k);
  }
  const double tex_f = rng.uniform(0.15, 0.3);
  const double tex_p1 = rng.uniform(0.0, 2.0 * std::numbers::pi), tex_p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < geo.size(); ++i) {
    const Pixel px = geo.pixel_of(i);
    std::array<double, 8> s{};
    switch (cls[i]) {
      case 0: s = kSoil; break;
      case 4: {
        const auto& t = scene.trees[static_cast<std::size_t>(scene.truth_labels[i] - 1)];
        for (std::size_t b = 0; b < 8; ++b) s[b] = t.spectrum[b] * shade[i];
        break;
      }
      case 1:
      case 3: {
        // Clumpy texture of roughly meter-scale blobs.
        const double tex = 1.0 + 0.12 * std::sin(tex_f * px.row * cs * 2.0 * std::numbers::pi + tex_p1) *
                                     std::sin(tex_f * px.col * cs * 2.0 * std::numbers::pi + tex_p2);
        const auto& base = cls[i] == 3 ? roof_spectra[static_cast<std::size_t>(roof_of[i])] : kGrass;
        for (std::size_t b = 0; b < 8; ++b) s[b] = base[b] * tex;
        break;
      }
      default: s = roof_spectra[static_cast<std::size_t>(roof_of[i])]; break;
    }
    for (std::size_t b = 0; b < 8; ++b) bands[b][i] = std::max(1e-4, s[b] + spec.spectral_noise * rng.normal());
  }
  for (auto& b : bands) scene.raster.add_band(std::move(b));
  scene.raster.assign_role("RED", 4);
  scene.raster.assign_role("NIR", 6);
  return scene;
}

// Writes dsm.asc, terrain.asc, band_i.asc, bands.manifest, truth_tops.csv and
// truth_crowns.json into `dir`.
inline void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_ascii_grid(dir / "dsm.asc", scene.dsm);
  io::write_ascii_grid(dir / "terrain.asc", scene.terrain);
  io::write_multiband(dir / "bands.manifest", scene.raster);
  io::write_text(dir / "truth_tops.csv", format_treetops_csv(scene.truth_tops, scene.dsm.geometry()));
  io::write_text(dir / "truth_crowns.json", format_crowns_geojson(scene.truth_crowns, scene.dsm.geometry()));
}

// Canonical scenes used by tests and examples.
inline SceneSpec sparse_scene_spec() { return {}; }

inline SceneSpec dense_scene_spec() {
  SceneSpec s;
  s.density = Density::Dense;
  s.n_trees = 200;
  return s;
}

inline SceneSpec urban_scene_spec() {
  SceneSpec s;
  s.density = Density::Urban;
  s.n_trees = 30;
  return s;
}

}  // namespace treecrown
