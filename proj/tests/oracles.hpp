// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Direct nested-loop reference implementations used to check the optimized
// library code, plus small random-input helpers shared by the test binaries.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "treecrown/treecrown.hpp"

namespace oracle {

using namespace treecrown;

inline GridGeometry square_geometry(int n, double cell_size = 1.0) { return {n, n, cell_size, 0.0, 0.0}; }

inline Grid random_grid(std::mt19937_64& rng, int w, int h, double lo = 0.0, double hi = 10.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Grid g(GridGeometry{w, h, 1.0, 0.0, 0.0});
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = u(rng);
  return g;
}

// Random grid with a few discrete levels, so plateaus and ties are common.
inline Grid random_level_grid(std::mt19937_64& rng, int w, int h, int levels) {
  std::uniform_int_distribution<int> u(0, levels - 1);
  Grid g(GridGeometry{w, h, 1.0, 0.0, 0.0});
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = u(rng);
  return g;
}

template <bool kMin>
Grid disk_extreme(const Grid& g, int radius) {
  Grid out(g.geometry(), g.nodata(), g.nodata());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      bool any = false;
      double best = 0.0;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          if (dr * dr + dc * dc > radius * radius) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= g.height() || cc >= g.width() || g.is_nodata(rr, cc)) continue;
          const double v = g(rr, cc);
          if (!any || (kMin ? v < best : v > best)) best = v;
          any = true;
        }
      }
      if (any) out(r, c) = best;
    }
  }
  return out;
}

inline Grid erode(const Grid& g, int radius) { return disk_extreme<true>(g, radius); }
inline Grid dilate(const Grid& g, int radius) { return disk_extreme<false>(g, radius); }
inline Grid opening(const Grid& g, int radius) { return dilate(erode(g, radius), radius); }

// Iterates r <- min(dilate(r, unit cross), mask) until nothing changes.
inline Grid reconstruct(const Grid& marker, const Grid& mask) {
  const int W = mask.width(), H = mask.height();
  Grid r(mask.geometry(), mask.nodata(), mask.nodata());
  for (std::size_t i = 0; i < r.size(); ++i)
    if (!mask.is_nodata(i) && !marker.is_nodata(i)) r[i] = std::min(marker[i], mask[i]);
  for (bool changed = true; changed;) {
    changed = false;
    Grid next = r;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (mask.is_nodata(y, x)) continue;
        bool any = !r.is_nodata(y, x);
        double v = any ? r(y, x) : 0.0;
        const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (const auto& q : nb) {
          if (q[0] < 0 || q[1] < 0 || q[0] >= H || q[1] >= W || r.is_nodata(q[0], q[1])) continue;
          v = any ? std::max(v, r(q[0], q[1])) : r(q[0], q[1]);
          any = true;
        }
        if (!any) continue;
        v = std::min(v, mask(y, x));
        if (r.is_nodata(y, x) || v != r(y, x)) {
          next(y, x) = v;
          changed = true;
        }
      }
    }
    r = next;
  }
  return r;
}

inline Grid top_hat(const Grid& dsm, int radius) {
  const Grid rec = reconstruct(erode(dsm, radius), dsm);
  Grid out(dsm.geometry(), dsm.nodata(), dsm.nodata());
  for (std::size_t i = 0; i < dsm.size(); ++i)
    if (!dsm.is_nodata(i) && !rec.is_nodata(i)) out[i] = std::max(0.0, dsm[i] - rec[i]);
  return out;
}

// Pixels strictly above every other valid pixel in their size x size window.
inline std::vector<Pixel> fixed_window_maxima(const Grid& dsm, const Mask& veg, int size) {
  const int w = size / 2;
  std::vector<Pixel> out;
  for (int r = 0; r < dsm.height(); ++r) {
    for (int c = 0; c < dsm.width(); ++c) {
      if (!veg(r, c) || dsm.is_nodata(r, c)) continue;
      bool top = true;
      for (int dr = -w; dr <= w && top; ++dr)
        for (int dc = -w; dc <= w && top; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= dsm.height() || cc >= dsm.width() || dsm.is_nodata(rr, cc)) continue;
          if (dsm(rr, cc) >= dsm(r, c)) top = false;
        }
      if (top) out.push_back({r, c});
    }
  }
  return out;
}

// Treetops from the top-hat written out directly: threshold, binary opening,
// 8-connected flood fill, then the first highest pixel of each component.
inline std::vector<Pixel> thr_treetops(const Grid& dsm, const Mask& veg, int se_radius, int opening_radius) {
  const Grid th = top_hat(dsm, se_radius);
  Grid binary(dsm.geometry(), 0.0, dsm.nodata());
  for (std::size_t i = 0; i < th.size(); ++i)
    if (!th.is_nodata(i) && th[i] > 1e-6) binary[i] = 1.0;
  const Grid opened = opening(binary, opening_radius);
  const int W = dsm.width(), H = dsm.height();
  std::vector<int> comp(dsm.size(), 0);
  std::vector<Pixel> out;
  int next = 0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const auto in_region = [&](int y, int x) { return !opened.is_nodata(y, x) && opened(y, x) > 0.5; };
      if (!in_region(r, c) || comp[dsm.geometry().index(r, c)]) continue;
      comp[dsm.geometry().index(r, c)] = ++next;
      std::vector<Pixel> members{{r, c}};
      for (std::size_t k = 0; k < members.size(); ++k) {
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int y = members[k].row + dr, x = members[k].col + dc;
            if (y < 0 || x < 0 || y >= H || x >= W || !in_region(y, x) || comp[dsm.geometry().index(y, x)]) continue;
            comp[dsm.geometry().index(y, x)] = next;
            members.push_back({y, x});
          }
      }
      std::sort(members.begin(), members.end());
      const Pixel* best = nullptr;
      for (const Pixel& p : members) {
        if (dsm.is_nodata(p)) continue;
        if (!best || dsm(p) > dsm(*best)) best = &p;
      }
      if (best && veg(*best)) out.push_back(*best);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// The weighted distance written out from its definition.
inline double distance(const TreetopCandidate& t, Pixel p, const Grid* dsm, const MultibandRaster& raster,
                       const SegmentationParams& sp, const DistanceNorms& norms) {
  const double cs = raster.geometry().cell_size;
  const double horiz = std::hypot((p.row - t.pixel.row) * cs, (p.col - t.pixel.col) * cs);
  double d = sp.w_h * std::min(1.0, horiz / (t.crown_diameter / 2.0));
  if (sp.w_v > 0.0) d += sp.w_v * std::min(1.0, std::fabs((*dsm)(t.pixel) - (*dsm)(p)) / norms.norm_v);
  if (sp.w_c > 0.0) {
    double s = 0.0;
    for (std::size_t b = 0; b < raster.band_count(); ++b) {
      const double q = (raster.band(b)(t.pixel) - raster.band(b)(p)) / norms.norm_c[b];
      s += q * q;
    }
    d += sp.w_c * std::min(1.0, std::sqrt(s / static_cast<double>(raster.band_count())));
  }
  return d;
}

// Exhaustive per-pixel argmin over every treetop (no cleanup).
inline LabelGrid argmin_assignment(const std::vector<TreetopCandidate>& tops, const Mask& veg, const Grid* dsm,
                                   const MultibandRaster& raster, const SegmentationParams& sp,
                                   const DistanceNorms& norms) {
  const GridGeometry& geo = raster.geometry();
  LabelGrid out(geo, 0, -1);
  const double theta = sp.effective_theta();
  for (int r = 0; r < geo.height; ++r) {
    for (int c = 0; c < geo.width; ++c) {
      if (!veg(r, c)) continue;
      double best = std::numeric_limits<double>::infinity();
      int label = 0;
      for (const auto& t : tops) {
        const double reach = sp.search_factor * t.crown_diameter / geo.cell_size;
        const double dr = r - t.pixel.row, dc = c - t.pixel.col;
        if (dr * dr + dc * dc > reach * reach) continue;
        const double d = distance(t, {r, c}, dsm, raster, sp, norms);
        if (d > theta) continue;
        if (d < best || (d == best && t.id < label)) {
          best = d;
          label = t.id;
        }
      }
      out(r, c) = label;
    }
  }
  return out;
}

// Greedy matching restated as repeated global maximum search: take the best
// remaining admissible pair, remove its crowns, repeat.
inline std::vector<MatchPair> greedy_by_rescan(const std::vector<MatchPair>& table, double gamma) {
  std::vector<MatchPair> out;
  std::vector<int> used_r, used_p;
  auto used = [](const std::vector<int>& v, int id) { return std::find(v.begin(), v.end(), id) != v.end(); };
  while (true) {
    const MatchPair* best = nullptr;
    for (const auto& m : table) {
      if (m.overlap < gamma || used(used_r, m.ref_id) || used(used_p, m.pred_id)) continue;
      if (!best || m.overlap > best->overlap ||
          (m.overlap == best->overlap &&
           (m.ref_id < best->ref_id || (m.ref_id == best->ref_id && m.pred_id < best->pred_id))))
        best = &m;
    }
    if (!best) break;
    out.push_back(*best);
    used_r.push_back(best->ref_id);
    used_p.push_back(best->pred_id);
  }
  return out;
}

// Every pairwise OR computed by counting shared pixels directly.
inline std::vector<MatchPair> overlap_pairs(const std::vector<CrownRecord>& refs,
                                            const std::vector<CrownRecord>& preds) {
  std::vector<MatchPair> out;
  for (const auto& p : preds)
    for (const auto& r : refs) {
      std::size_t shared = 0;
      for (const Pixel& a : p.pixels)
        for (const Pixel& b : r.pixels) shared += a == b;
      if (shared == 0) continue;
      out.push_back({r.id, p.id,
                     2.0 * static_cast<double>(shared) / static_cast<double>(r.pixels.size() + p.pixels.size())});
    }
  return out;
}

// A paraboloid bump of the given apex height and radius (pixels) on a base.
inline void add_paraboloid(Grid& g, Pixel apex, double height, double radius_px, double base = 0.0) {
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c) {
      const double d2 = double(r - apex.row) * (r - apex.row) + double(c - apex.col) * (c - apex.col);
      const double z = base + height * (1.0 - d2 / (radius_px * radius_px));
      if (z > g(r, c)) g(r, c) = z;
    }
}

// Eight equal-valued bands with RED and NIR roles; vegetation where `veg`.
inline MultibandRaster two_class_raster(const Mask& veg) {
  MultibandRaster m;
  for (int b = 0; b < 8; ++b) {
    Grid g(veg.geometry(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = veg[i] ? (b == 6 ? 0.40 : 0.05) : (b == 6 ? 0.22 : 0.18);
    m.add_band(std::move(g));
  }
  m.assign_role("RED", 4);
  m.assign_role("NIR", 6);
  return m;
}

}  // namespace oracle
