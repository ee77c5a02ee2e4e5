// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Crown delineation seeded at treetops with a weighted horizontal, vertical
// and spectral distance, plus the centrality and size-coherence checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "treecrown/error.hpp"
#include "treecrown/morphology.hpp"
#include "treecrown/raster.hpp"
#include "treecrown/treetops.hpp"

namespace treecrown {

struct SegmentationParams {
  double w_h = 0.8;
  double w_v = 1.0;
  double w_c = 0.5;
  std::optional<double> theta;    // unset: w_h + 0.3 w_v + 0.5 w_c
  std::optional<double> norm_v;   // unset: 95th percentile of treetop heights
  double search_factor = 2.0;     // pixels farther than factor * chi are never assigned

  double effective_theta() const { return theta ? *theta : w_h + 0.3 * w_v + 0.5 * w_c; }

  void validate() const {
    if (!(w_h >= 0.0 && w_v >= 0.0 && w_c >= 0.0)) throw ConfigError("segmentation weights must be >= 0");
    if (theta && !(*theta >= 0.0)) throw ConfigError("theta must be >= 0");
    if (norm_v && !(*norm_v > 0.0)) throw ConfigError("norm_v must be > 0");
    if (!(search_factor > 0.0)) throw ConfigError("search_factor must be > 0");
  }
};

// Scene-level normalization ranges. The horizontal range is per treetop
// (half its crown diameter) and is not stored here.
struct DistanceNorms {
  double norm_v = 1.0;
  std::vector<double> norm_c;  // one range per band
};

// Nearest-rank percentile, q in (0, 1].
inline double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

inline DistanceNorms compute_norms(const std::vector<TreetopCandidate>& tops, const MultibandRaster& raster,
                                   const Mask& veg, const SegmentationParams& params) {
  DistanceNorms n;
  if (params.norm_v) {
    n.norm_v = *params.norm_v;
  } else {
    std::vector<double> h;
    for (const auto& t : tops)
      if (std::isfinite(t.above_ground)) h.push_back(t.above_ground);
    if (!h.empty()) n.norm_v = nearest_rank_percentile(std::move(h), 0.95);
    if (!(n.norm_v > 0.0)) n.norm_v = 1.0;
  }
  for (const Grid& band : raster.bands()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < band.size(); ++i) {
      if (!veg[i] || band.is_nodata(i)) continue;
      lo = std::min(lo, band[i]);
      hi = std::max(hi, band[i]);
    }
    const double range = hi - lo;
    n.norm_c.push_back(range > 0.0 && std::isfinite(range) ? range : 1.0);
  }
  return n;
}

// Everything the distance needs, bundled so the kernel stays a cheap call.
struct DistanceContext {
  const Grid* dsm = nullptr;  // surface for the vertical term; unused when w_v == 0
  const MultibandRaster* raster = nullptr;
  SegmentationParams params;
  DistanceNorms norms;
};

// Weighted distance between a treetop and a pixel. Each term is normalized
// and clamped to [0, 1]; the spectral term is the root-mean-square of the
// per-band normalized differences. Nodata anywhere gives +inf.
inline double kernel_distance(const TreetopCandidate& top, Pixel px, const DistanceContext& ctx) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const GridGeometry& geo = ctx.raster->geometry();
  const std::size_t i = geo.index(px), t = geo.index(top.pixel);
  const double norm_h = top.crown_diameter / 2.0;
  const double dr = (px.row - top.pixel.row) * geo.cell_size;
  const double dc = (px.col - top.pixel.col) * geo.cell_size;
  const double d_h = std::min(1.0, std::sqrt(dr * dr + dc * dc) / norm_h);
  double d = ctx.params.w_h * d_h;
  if (ctx.params.w_v > 0.0) {
    const Grid& dsm = *ctx.dsm;
    if (dsm.is_nodata(i) || dsm.is_nodata(t)) return kInf;
    d += ctx.params.w_v * std::min(1.0, std::abs(dsm[t] - dsm[i]) / ctx.norms.norm_v);
  }
  if (ctx.params.w_c > 0.0) {
    const auto& bands = ctx.raster->bands();
    double acc = 0.0;
    for (std::size_t b = 0; b < bands.size(); ++b) {
      if (bands[b].is_nodata(i) || bands[b].is_nodata(t)) return kInf;
      const double q = (bands[b][t] - bands[b][i]) / ctx.norms.norm_c[b];
      acc += q * q;
    }
    const double d_c = bands.empty() ? 0.0 : std::min(1.0, std::sqrt(acc / static_cast<double>(bands.size())));
    d += ctx.params.w_c * d_c;
  }
  return d;
}

// Per-pixel argmin assignment before connectivity cleanup. A vegetation pixel
// takes the label of the treetop with the smallest distance among those whose
// search radius reaches it, provided that distance is <= theta. Equal
// distances go to the smaller id.
inline LabelGrid assign_pixels(const std::vector<TreetopCandidate>& tops, const Mask& veg, const DistanceContext& ctx) {
  ctx.params.validate();
  const GridGeometry& geo = ctx.raster->geometry();
  if (!(veg.geometry() == geo)) throw InputError("vegetation mask and imagery must share geometry");
  if (ctx.params.w_v > 0.0 && (!ctx.dsm || !(ctx.dsm->geometry() == geo)))
    throw InputError("surface and imagery must share geometry");
  const double theta = ctx.params.effective_theta();

  std::vector<const TreetopCandidate*> order;
  for (const auto& t : tops) {
    if (t.id <= 0) throw InputError("treetops must carry positive ids");
    if (!geo.contains(t.pixel)) throw InputError("treetop outside the grid");
    if (!(t.crown_diameter > 0.0)) throw InputError("treetops need crown diameters before delineation");
    order.push_back(&t);
  }
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (std::size_t k = 1; k < order.size(); ++k)
    if (order[k]->id == order[k - 1]->id) throw InputError("duplicate treetop id");

  LabelGrid labels(geo, 0, -1);
  std::vector<double> best(geo.size(), std::numeric_limits<double>::infinity());
  for (const TreetopCandidate* t : order) {
    const double reach = ctx.params.search_factor * t->crown_diameter;
    const double reach_px = reach / geo.cell_size;
    const int span = static_cast<int>(std::floor(reach_px));
    const double reach2 = reach_px * reach_px;
    for (int r = std::max(0, t->pixel.row - span); r <= std::min(geo.height - 1, t->pixel.row + span); ++r) {
      const double dr = r - t->pixel.row;
      for (int c = std::max(0, t->pixel.col - span); c <= std::min(geo.width - 1, t->pixel.col + span); ++c) {
        const double dc = c - t->pixel.col;
        if (dr * dr + dc * dc > reach2) continue;
        const std::size_t i = geo.index(r, c);
        if (!veg[i]) continue;
        const double d = kernel_distance(*t, {r, c}, ctx);
        if (d <= theta && d < best[i]) {
          best[i] = d;
          labels[i] = t->id;
        }
      }
    }
  }
  return labels;
}

// Gives every treetop its own pixel, then keeps only the 8-connected part of
// each label that contains its treetop.
inline void connectivity_cleanup(LabelGrid& labels, const std::vector<TreetopCandidate>& tops) {
  const GridGeometry& geo = labels.geometry();
  for (const auto& t : tops) labels(t.pixel) = t.id;
  std::vector<std::uint8_t> keep(geo.size(), 0);
  std::vector<std::size_t> stack;
  for (const auto& t : tops) {
    const std::size_t seed = geo.index(t.pixel);
    if (keep[seed]) continue;
    keep[seed] = 1;
    stack.push_back(seed);
    while (!stack.empty()) {
      const Pixel p = geo.pixel_of(stack.back());
      stack.pop_back();
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = p.row + dr, cc = p.col + dc;
          if (!geo.contains(rr, cc)) continue;
          const std::size_t q = geo.index(rr, cc);
          if (keep[q] || labels[q] != t.id) continue;
          keep[q] = 1;
          stack.push_back(q);
        }
      }
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (!keep[i]) labels[i] = 0;
}

struct CrownSegment {
  int id = 0;  // id of the owning treetop
  Pixel top;
  std::vector<Pixel> pixels;  // raster order
  double area = 0.0;          // m^2
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  double largest_diameter = 0.0;  // m, center to center
  double equivalent_diameter = 0.0;
};

namespace detail {

inline std::int64_t cross(Pixel o, Pixel a, Pixel b) {
  return std::int64_t(a.row - o.row) * (b.col - o.col) - std::int64_t(a.col - o.col) * (b.row - o.row);
}

// Monotone-chain hull of points sorted by (row, col); collinear points dropped.
inline std::vector<Pixel> convex_hull(std::vector<Pixel> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Pixel> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Pixel& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace detail

// Largest pixel-center distance within the set, in pixels.
inline double largest_pixel_distance(const std::vector<Pixel>& pixels) {
  const std::vector<Pixel> hull = detail::convex_hull(pixels);
  double best = 0.0;
  for (std::size_t a = 0; a < hull.size(); ++a) {
    for (std::size_t b = a + 1; b < hull.size(); ++b) {
      const double dr = hull[a].row - hull[b].row, dc = hull[a].col - hull[b].col;
      best = std::max(best, dr * dr + dc * dc);
    }
  }
  return std::sqrt(best);
}

// One segment per treetop that still owns at least one pixel, in treetop order.
inline std::vector<CrownSegment> extract_segments(const LabelGrid& labels, const std::vector<TreetopCandidate>& tops) {
  const GridGeometry& geo = labels.geometry();
  int max_id = 0;
  for (const auto& t : tops) max_id = std::max(max_id, t.id);
  std::vector<std::vector<Pixel>> by_id(static_cast<std::size_t>(max_id) + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l > 0 && l <= max_id) by_id[static_cast<std::size_t>(l)].push_back(geo.pixel_of(i));
  }
  const double cell_area = geo.cell_size * geo.cell_size;
  std::vector<CrownSegment> segs;
  for (const auto& t : tops) {
    auto& px = by_id[static_cast<std::size_t>(t.id)];
    if (px.empty()) continue;
    CrownSegment s;
    s.id = t.id;
    s.top = t.pixel;
    double sr = 0.0, sc = 0.0;
    for (const Pixel& p : px) {
      sr += p.row;
      sc += p.col;
    }
    s.centroid_row = sr / static_cast<double>(px.size());
    s.centroid_col = sc / static_cast<double>(px.size());
    s.area = static_cast<double>(px.size()) * cell_area;
    s.largest_diameter = largest_pixel_distance(px) * geo.cell_size;
    s.equivalent_diameter = 2.0 * std::sqrt(s.area / std::numbers::pi);
    s.pixels = std::move(px);
    segs.push_back(std::move(s));
  }
  return segs;
}

struct Delineation {
  LabelGrid labels;
  std::vector<CrownSegment> segments;
};

inline Delineation delineate(const std::vector<TreetopCandidate>& tops, const Mask& veg, const DistanceContext& ctx) {
  Delineation d;
  d.labels = assign_pixels(tops, veg, ctx);
  connectivity_cleanup(d.labels, tops);
  d.segments = extract_segments(d.labels, tops);
  return d;
}

// Convenience overload computing the normalization ranges from the inputs.
inline Delineation delineate(const std::vector<TreetopCandidate>& tops, const Grid& dsm, const MultibandRaster& raster,
                             const Mask& veg, const SegmentationParams& params) {
  DistanceContext ctx{&dsm, &raster, params, compute_norms(tops, raster, veg, params)};
  return delineate(tops, veg, ctx);
}

// Treetop within a third of the segment's largest diameter from its centroid.
inline bool center_check(const CrownSegment& seg, double cell_size) {
  const double dr = seg.top.row - seg.centroid_row, dc = seg.top.col - seg.centroid_col;
  return std::sqrt(dr * dr + dc * dc) * cell_size <= seg.largest_diameter / 3.0 + 1e-12;
}

// Drops segments whose area deviates from the mean area of the neighboring
// segments (other treetops within neighborhood_radius meters) by more than
// three population standard deviations. Fewer than three neighbors: kept.
inline std::vector<CrownSegment> size_coherence_filter(const std::vector<CrownSegment>& segs, double neighborhood_radius,
                                                       double cell_size) {
  if (!(neighborhood_radius >= 0.0)) throw ConfigError("neighborhood_radius must be >= 0");
  const double r_px = neighborhood_radius / cell_size;
  const double r2 = r_px * r_px;
  std::vector<CrownSegment> out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < segs.size(); ++j) {
      if (j == i) continue;
      const double dr = segs[i].top.row - segs[j].top.row, dc = segs[i].top.col - segs[j].top.col;
      if (dr * dr + dc * dc > r2) continue;
      sum += segs[j].area;
      ++n;
    }
    if (n >= 3) {
      const double mu = sum / static_cast<double>(n);
      for (std::size_t j = 0; j < segs.size(); ++j) {
        if (j == i) continue;
        const double dr = segs[i].top.row - segs[j].top.row, dc = segs[i].top.col - segs[j].top.col;
        if (dr * dr + dc * dc > r2) continue;
        sum2 += (segs[j].area - mu) * (segs[j].area - mu);
      }
      const double sigma = std::sqrt(sum2 / static_cast<double>(n));
      if (std::abs(segs[i].area - mu) > 3.0 * sigma) continue;
    }
    out.push_back(segs[i]);
  }
  return out;
}

struct PostprocessParams {
  double neighborhood_radius = 30.0;  // meters
};

struct PostprocessResult {
  std::vector<CrownSegment> segments;
  std::vector<TreetopCandidate> tops;
};

// Center check, then size coherence. Labels of dropped segments are cleared
// in `labels`. Treetops without a segment are dropped as well.
inline PostprocessResult postprocess(LabelGrid& labels, const std::vector<CrownSegment>& segs,
                                     const std::vector<TreetopCandidate>& tops, const PostprocessParams& params) {
  const double cs = labels.geometry().cell_size;
  std::vector<CrownSegment> centered;
  for (const auto& s : segs)
    if (center_check(s, cs)) centered.push_back(s);
  PostprocessResult res;
  res.segments = size_coherence_filter(centered, params.neighborhood_radius, cs);

  int max_id = 0;
  for (const auto& t : tops) max_id = std::max(max_id, t.id);
  for (const auto& s : segs) max_id = std::max(max_id, s.id);
  std::vector<std::uint8_t> alive(static_cast<std::size_t>(max_id) + 1, 0);
  for (const auto& s : res.segments) alive[static_cast<std::size_t>(s.id)] = 1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l > 0 && (l > max_id || !alive[static_cast<std::size_t>(l)])) labels[i] = 0;
  }
  for (const auto& t : tops)
    if (t.id > 0 && t.id <= max_id && alive[static_cast<std::size_t>(t.id)]) res.tops.push_back(t);
  return res;
}

}  // namespace treecrown
