// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Terrain / off-terrain classification of DSM cells with a cloth simulation
// filter, and per-point above-ground height.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "treecrown/error.hpp"
#include "treecrown/raster.hpp"

namespace treecrown {

struct CsfParams {
  double cloth_resolution = 2.0;  // meters between cloth nodes
  int rigidness = 2;              // 1 (soft) .. 3 (stiff)
  int gravity_iterations = 500;
  double class_threshold = 0.5;   // meters
  double time_step = 0.65;

  void validate() const {
    if (!(cloth_resolution > 0.0)) throw ConfigError("cloth_resolution must be > 0");
    if (rigidness < 1 || rigidness > 3) throw ConfigError("rigidness must be 1, 2 or 3");
    if (gravity_iterations < 1) throw ConfigError("gravity_iterations must be >= 1");
    if (!(class_threshold > 0.0)) throw ConfigError("class_threshold must be > 0");
    if (!(time_step > 0.0)) throw ConfigError("time_step must be > 0");
  }
};

namespace detail {

// Fraction of a height difference removed per spring when one / both ends
// move, after `n` relaxation passes at 0.3 per pass.
inline double single_move(int n) { return 1.0 - std::pow(0.7, n); }
inline double double_move(int n) { return 0.5 * (1.0 - std::pow(0.4, n)); }

struct ClothNode {
  double pos = 0.0;
  double old = 0.0;
  double floor = 0.0;  // inverted surface height under the node
  bool movable = true;
};

}  // namespace detail

// Drapes a cloth over the inverted DSM and returns the cells lying within
// class_threshold of the settled cloth.
//
// Cells become points (x, y, -z). The cloth starts just above the highest
// inverted point and falls under gravity with Verlet integration; springs to
// the four neighbors only act vertically. A node that sinks below the
// inverted surface under it is snapped back and pinned. Iteration stops after
// gravity_iterations steps or once the largest per-step displacement drops
// below 0.005 m.
inline Mask csf_classify(const Grid& dsm, const CsfParams& params) {
  params.validate();
  const GridGeometry& geo = dsm.geometry();
  if (dsm.valid_count() == 0) throw InputError("cloth simulation needs at least one valid DSM cell");

  const double cs = geo.cell_size;
  const double extent_u = (geo.width - 1) * cs;
  const double extent_v = (geo.height - 1) * cs;
  const double res = params.cloth_resolution;
  const int nu = static_cast<int>(std::floor(extent_u / res)) + 2;
  const int nv = static_cast<int>(std::floor(extent_v / res)) + 2;

  // Nearest valid cell for each node; an expanding ring search covers holes.
  auto nearest_valid = [&](int row, int col) -> double {
    if (!dsm.is_nodata(row, col)) return -dsm(row, col);
    const int max_r = std::max(geo.width, geo.height);
    for (int rad = 1; rad <= max_r; ++rad) {
      double best = std::numeric_limits<double>::quiet_NaN();
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int dr = -rad; dr <= rad; ++dr) {
        for (int dc = -rad; dc <= rad; ++dc) {
          if (std::max(std::abs(dr), std::abs(dc)) != rad) continue;
          const int rr = row + dr, cc = col + dc;
          if (!geo.contains(rr, cc) || dsm.is_nodata(rr, cc)) continue;
          const double d2 = double(dr) * dr + double(dc) * dc;
          if (d2 < best_d2) {
            best_d2 = d2;
            best = -dsm(rr, cc);
          }
        }
      }
      if (!std::isnan(best)) return best;
    }
    throw InternalError("no valid DSM cell found for cloth node");
  };

  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dsm.size(); ++i)
    if (!dsm.is_nodata(i)) top = std::max(top, -dsm[i]);

  std::vector<detail::ClothNode> nodes(static_cast<std::size_t>(nu) * static_cast<std::size_t>(nv));
  auto node = [&](int iu, int iv) -> detail::ClothNode& {
    return nodes[static_cast<std::size_t>(iv) * static_cast<std::size_t>(nu) + static_cast<std::size_t>(iu)];
  };
  for (int iv = 0; iv < nv; ++iv) {
    for (int iu = 0; iu < nu; ++iu) {
      const int col = std::clamp(static_cast<int>(std::lround(iu * res / cs)), 0, geo.width - 1);
      const int row = std::clamp(static_cast<int>(std::lround(iv * res / cs)), 0, geo.height - 1);
      auto& n = node(iu, iv);
      n.floor = nearest_valid(row, col);
      n.pos = n.old = top + 0.05;
    }
  }

  constexpr double kDamping = 0.01;
  constexpr double kGravity = 0.2;
  const double step = -kGravity * params.time_step * params.time_step;
  const double single = detail::single_move(params.rigidness);
  const double both = detail::double_move(params.rigidness);

  auto relax = [&](detail::ClothNode& a, detail::ClothNode& b) {
    const double diff = b.pos - a.pos;
    if (a.movable && b.movable) {
      a.pos += diff * both;
      b.pos -= diff * both;
    } else if (a.movable) {
      a.pos += diff * single;
    } else if (b.movable) {
      b.pos -= diff * single;
    }
  };

  for (int it = 0; it < params.gravity_iterations; ++it) {
    for (auto& n : nodes) {
      if (!n.movable) continue;
      const double prev = n.pos;
      n.pos = n.pos + (n.pos - n.old) * (1.0 - kDamping) + step;
      n.old = prev;
    }
    for (int iv = 0; iv < nv; ++iv) {
      for (int iu = 0; iu < nu; ++iu) {
        if (iu + 1 < nu) relax(node(iu, iv), node(iu + 1, iv));
        if (iv + 1 < nv) relax(node(iu, iv), node(iu, iv + 1));
      }
    }
    double max_move = 0.0;
    for (auto& n : nodes) {
      if (!n.movable) continue;
      max_move = std::max(max_move, std::abs(n.pos - n.old));
      if (n.pos < n.floor) {
        n.pos = n.floor;
        n.movable = false;
      }
    }
    if (max_move > 0.0 && max_move < 0.005) break;
  }

  Mask terrain(geo);
  for (int r = 0; r < geo.height; ++r) {
    const double v = r * cs / res;
    const int iv = std::min(static_cast<int>(v), nv - 2);
    const double fv = v - iv;
    for (int c = 0; c < geo.width; ++c) {
      if (dsm.is_nodata(r, c)) continue;
      const double u = c * cs / res;
      const int iu = std::min(static_cast<int>(u), nu - 2);
      const double fu = u - iu;
      const double cloth = (1 - fu) * (1 - fv) * node(iu, iv).pos + fu * (1 - fv) * node(iu + 1, iv).pos +
                           (1 - fu) * fv * node(iu, iv + 1).pos + fu * fv * node(iu + 1, iv + 1).pos;
      if (std::abs(-dsm(r, c) - cloth) <= params.class_threshold) terrain.set(r, c, true);
    }
  }
  return terrain;
}

// How above-ground height is obtained for a treetop.
struct HeightMode {
  enum class Kind { Dtm, Constant, LowestPoint };

  Kind kind = Kind::Dtm;
  double value = 0.0;  // height for Constant, cap for LowestPoint

  static HeightMode dtm() { return {}; }
  static HeightMode constant(double h) { return {Kind::Constant, h}; }
  static HeightMode lowest_point(double max_h) { return {Kind::LowestPoint, max_h}; }

  bool operator==(const HeightMode&) const = default;

  void validate() const {
    if (kind == Kind::Constant && !(value > 0.0)) throw ConfigError("constant height must be > 0");
    if (kind == Kind::LowestPoint && !(value > 0.0))
      throw ConfigError("lowest-point height cap must be > 0");
  }

  // "dtm", "constant:10", "lowest:13".
  std::string to_string() const;
  static HeightMode parse(const std::string& text);
};

inline std::string HeightMode::to_string() const {
  auto num = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  switch (kind) {
    case Kind::Dtm: return "dtm";
    case Kind::Constant: return "constant:" + num(value);
    case Kind::LowestPoint: return "lowest:" + num(value);
  }
  return "dtm";
}

inline HeightMode HeightMode::parse(const std::string& text) {
  if (text == "dtm") return dtm();
  auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("bad height mode '" + text + "'");
  const std::string name = text.substr(0, colon);
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("bad height mode value in '" + text + "'");
  }
  HeightMode m;
  if (name == "constant") {
    m = constant(v);
  } else if (name == "lowest") {
    m = lowest_point(v);
  } else {
    throw ConfigError("unknown height mode '" + name + "'");
  }
  m.validate();
  return m;
}

// Answers above-ground height queries against one DSM/terrain pair. Window
// sums come from summed-area tables, so each query is O(1) per window size.
class HeightResolver {
 public:
  // `window_radius` is the half-width in pixels of the square terrain window.
  HeightResolver(const Grid& dsm, const Mask& terrain, int window_radius, HeightMode mode,
                 std::optional<HeightMode> dtm_fallback = std::nullopt)
      : dsm_(&dsm), window_radius_(window_radius), mode_(mode), fallback_(dtm_fallback) {
    if (!(terrain.geometry() == dsm.geometry()))
      throw InputError("terrain mask and DSM must share geometry");
    if (window_radius < 1) throw ConfigError("terrain window radius must be >= 1");
    mode_.validate();
    if (fallback_) {
      if (fallback_->kind == HeightMode::Kind::Dtm)
        throw ConfigError("the DTM fallback must be a constant or lowest-point mode");
      fallback_->validate();
    }
    const auto mm = dsm.min_max();
    if (!mm) throw InputError("DSM has no valid cells");
    scene_min_ = mm->first;
    build_tables(terrain);
  }

  const HeightMode& mode() const { return mode_; }
  double scene_min() const { return scene_min_; }

  // DSM(s) minus the mean DSM over terrain cells in the window around s. An
  // empty window doubles (at most four times); after that the fallback mode
  // answers, or NoTerrainError is thrown.
  double above_ground(Pixel s) const {
    check(s);
    int w = window_radius_;
    for (int attempt = 0; attempt <= 4; ++attempt, w *= 2) {
      const auto [count, sum] = window_sums(s, w);
      if (count > 0) return (*dsm_)(s) - (ref_ + sum / static_cast<double>(count));
    }
    if (fallback_) return resolve_with(*fallback_, s);
    throw NoTerrainError("no terrain cells near pixel (" + std::to_string(s.row) + ", " +
                         std::to_string(s.col) + ")");
  }

  double resolve(Pixel s) const { return resolve_with(mode_, s); }

 private:
  double resolve_with(const HeightMode& m, Pixel s) const {
    check(s);
    switch (m.kind) {
      case HeightMode::Kind::Dtm: return above_ground(s);
      case HeightMode::Kind::Constant: return m.value;
      case HeightMode::Kind::LowestPoint: return std::min((*dsm_)(s) - scene_min_, m.value);
    }
    return 0.0;
  }

  void check(Pixel s) const {
    if (!dsm_->geometry().contains(s)) throw InputError("height query outside the grid");
    if (dsm_->is_nodata(s)) throw InputError("height query on a nodata cell");
  }

  void build_tables(const Mask& terrain) {
    const GridGeometry& g = dsm_->geometry();
    const std::size_t stride = static_cast<std::size_t>(g.width) + 1;
    count_.assign(stride * (static_cast<std::size_t>(g.height) + 1), 0);
    sum_.assign(count_.size(), 0.0);
    // Offsetting by the mean terrain height keeps the running sums small.
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < dsm_->size(); ++i) {
      if (terrain[i] && !dsm_->is_nodata(i)) {
        acc += (*dsm_)[i];
        ++n;
      }
    }
    ref_ = n ? acc / static_cast<double>(n) : 0.0;
    for (int r = 0; r < g.height; ++r) {
      std::int64_t row_count = 0;
      double row_sum = 0.0;
      for (int c = 0; c < g.width; ++c) {
        const std::size_t i = g.index(r, c);
        if (terrain[i] && !dsm_->is_nodata(i)) {
          ++row_count;
          row_sum += (*dsm_)[i] - ref_;
        }
        const std::size_t k = (static_cast<std::size_t>(r) + 1) * stride + static_cast<std::size_t>(c) + 1;
        count_[k] = count_[k - stride] + row_count;
        sum_[k] = sum_[k - stride] + row_sum;
      }
    }
  }

  std::pair<std::int64_t, double> window_sums(Pixel s, int w) const {
    const GridGeometry& g = dsm_->geometry();
    const std::size_t stride = static_cast<std::size_t>(g.width) + 1;
    const std::size_t r0 = static_cast<std::size_t>(std::max(0, s.row - w));
    const std::size_t r1 = static_cast<std::size_t>(std::min(g.height - 1, s.row + w)) + 1;
    const std::size_t c0 = static_cast<std::size_t>(std::max(0, s.col - w));
    const std::size_t c1 = static_cast<std::size_t>(std::min(g.width - 1, s.col + w)) + 1;
    auto at = [&](const auto& t, std::size_t r, std::size_t c) { return t[r * stride + c]; };
    const std::int64_t cnt = at(count_, r1, c1) - at(count_, r0, c1) - at(count_, r1, c0) + at(count_, r0, c0);
    const double sum = at(sum_, r1, c1) - at(sum_, r0, c1) - at(sum_, r1, c0) + at(sum_, r0, c0);
    return {cnt, sum};
  }

  const Grid* dsm_;
  int window_radius_;
  HeightMode mode_;
  std::optional<HeightMode> fallback_;
  double scene_min_ = 0.0;
  double ref_ = 0.0;
  std::vector<std::int64_t> count_;
  std::vector<double> sum_;
};

inline double above_ground_height(const Grid& dsm, const Mask& terrain, Pixel s, int window_radius) {
  return HeightResolver(dsm, terrain, window_radius, HeightMode::dtm()).above_ground(s);
}

inline double resolve_height(const Grid& dsm, const Mask& terrain, Pixel s, const HeightMode& mode,
                             int window_radius) {
  return HeightResolver(dsm, terrain, window_radius, mode).resolve(s);
}

// Pixels spanned by `meters` (rounded, at least 1).
inline int meters_to_pixels(double meters, double cell_size) {
  return std::max(1, static_cast<int>(std::lround(meters / cell_size)));
}

}  // namespace treecrown
