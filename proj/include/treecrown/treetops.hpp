// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Treetop candidate extraction (top-hat by reconstruction, fixed-window
// local maxima, slope-break variable windows), the above-ground height check
// and allometric non-maximum suppression.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "treecrown/error.hpp"
#include "treecrown/io.hpp"
#include "treecrown/morphology.hpp"
#include "treecrown/raster.hpp"
#include "treecrown/terrain.hpp"

namespace treecrown {

struct TreetopCandidate {
  int id = 0;  // 1-based once the final set is fixed, 0 before
  Pixel pixel;
  double dsm_height = 0.0;
  double above_ground = std::numeric_limits<double>::quiet_NaN();
  double crown_diameter = std::numeric_limits<double>::quiet_NaN();  // meters
};

// Crown diameter in meters from above-ground height in meters.
inline double allometric_diameter(double h) {
  if (!(h >= 0.0)) throw InputError("allometric height must be >= 0");
  return 3.09632 + 0.00895 * h * h;
}

struct DetectorKind {
  enum class Kind { Thr, FixedWindow, SlopeBreak };

  Kind kind = Kind::Thr;
  int size = 0;  // window side for FixedWindow

  static DetectorKind thr() { return {}; }
  static DetectorKind fixed_window(int n) {
    if (n < 3 || n % 2 == 0) throw ConfigError("fixed window size must be odd and >= 3");
    return {Kind::FixedWindow, n};
  }
  static DetectorKind slope_break() { return {Kind::SlopeBreak, 0}; }

  bool operator==(const DetectorKind&) const = default;

  // Short names as used in metrics tables: TH, F_7, SB.
  std::string label() const {
    switch (kind) {
      case Kind::Thr: return "TH";
      case Kind::FixedWindow: return "F_" + std::to_string(size);
      case Kind::SlopeBreak: return "SB";
    }
    return "TH";
  }
  // Config spelling: thr, fixed:7, sb.
  std::string to_string() const {
    switch (kind) {
      case Kind::Thr: return "thr";
      case Kind::FixedWindow: return "fixed:" + std::to_string(size);
      case Kind::SlopeBreak: return "sb";
    }
    return "thr";
  }
  static DetectorKind parse(const std::string& text) {
    const std::string t = io::lower(text);
    if (t == "thr" || t == "th") return thr();
    if (t == "sb") return slope_break();
    for (const std::string prefix : {"fixed:", "f_", "f"}) {
      if (t.rfind(prefix, 0) == 0 && t.size() > prefix.size()) {
        const std::string num = t.substr(prefix.size());
        if (num.find_first_not_of("0123456789") != std::string::npos) break;
        return fixed_window(std::stoi(num));
      }
    }
    throw ConfigError("unknown detector '" + text + "'");
  }
};

namespace detail {

inline TreetopCandidate make_candidate(const Grid& dsm, Pixel p) {
  TreetopCandidate c;
  c.pixel = p;
  c.dsm_height = dsm(p);
  return c;
}

// Square max filter of side 2w+1 (clipped), nodata treated as -inf.
inline Grid square_max(const Grid& g, int w) {
  const int W = g.width(), H = g.height();
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> tmp(g.size()), line(static_cast<std::size_t>(std::max(W, H))),
      out_line(line.size()), fwd, bwd;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) line[static_cast<std::size_t>(c)] = g.is_nodata(r, c) ? ninf : g(r, c);
    running_extreme<false>(std::span<const double>(line.data(), static_cast<std::size_t>(W)), w, ninf, fwd,
                           bwd, std::span<double>(tmp.data() + g.geometry().index(r, 0), static_cast<std::size_t>(W)));
  }
  Grid out(g.geometry(), ninf, g.nodata());
  for (int c = 0; c < W; ++c) {
    for (int r = 0; r < H; ++r) line[static_cast<std::size_t>(r)] = tmp[g.geometry().index(r, c)];
    running_extreme<false>(std::span<const double>(line.data(), static_cast<std::size_t>(H)), w, ninf, fwd,
                           bwd, std::span<double>(out_line.data(), static_cast<std::size_t>(H)));
    for (int r = 0; r < H; ++r) out(r, c) = out_line[static_cast<std::size_t>(r)];
  }
  return out;
}

// True iff dsm(p) is strictly above every other valid cell within Chebyshev
// distance w.
inline bool strict_window_max(const Grid& dsm, Pixel p, int w) {
  const double v = dsm(p);
  const GridGeometry& geo = dsm.geometry();
  for (int r = std::max(0, p.row - w); r <= std::min(geo.height - 1, p.row + w); ++r) {
    for (int c = std::max(0, p.col - w); c <= std::min(geo.width - 1, p.col + w); ++c) {
      if (r == p.row && c == p.col) continue;
      if (!dsm.is_nodata(r, c) && dsm(r, c) >= v) return false;
    }
  }
  return true;
}

}  // namespace detail

// Components of the opened region where the top-hat exceeds min_response,
// one highest-DSM pixel per component (ties toward smaller row, then col),
// restricted to vegetation.
inline std::vector<TreetopCandidate> detect_thr(const Grid& dsm, const Mask& veg, const StructuringElement& se,
                                                const StructuringElement& opening_se, double min_response = 1e-6) {
  if (!(veg.geometry() == dsm.geometry())) throw InputError("vegetation mask and DSM must share geometry");
  const Grid thr = top_hat_reconstruction(dsm, se);
  Grid binary(dsm.geometry(), 0.0, dsm.nodata());
  for (std::size_t i = 0; i < thr.size(); ++i)
    if (!thr.is_nodata(i) && thr[i] > min_response) binary[i] = 1.0;
  const Grid opened = opening(binary, opening_se);
  Mask region(dsm.geometry());
  for (std::size_t i = 0; i < opened.size(); ++i) region.set(i, !opened.is_nodata(i) && opened[i] > 0.5);

  int n = 0;
  const LabelGrid labels = label_components(region, Connectivity::Eight, &n);
  std::vector<std::int64_t> best(static_cast<std::size_t>(n) + 1, -1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l <= 0 || dsm.is_nodata(i)) continue;
    auto& b = best[static_cast<std::size_t>(l)];
    // Raster order visits smaller (row, col) first, so strict > keeps the tie rule.
    if (b < 0 || dsm[i] > dsm[static_cast<std::size_t>(b)]) b = static_cast<std::int64_t>(i);
  }
  std::vector<TreetopCandidate> out;
  for (int l = 1; l <= n; ++l) {
    const auto b = best[static_cast<std::size_t>(l)];
    if (b < 0 || !veg[static_cast<std::size_t>(b)]) continue;
    out.push_back(detail::make_candidate(dsm, dsm.geometry().pixel_of(static_cast<std::size_t>(b))));
  }
  return out;
}

// Pixels strictly greater than every other valid pixel of the size x size
// window around them, inside vegetation. Output in raster order.
inline std::vector<TreetopCandidate> detect_fixed_window(const Grid& dsm, const Mask& veg, int size) {
  if (size < 3 || size % 2 == 0) throw InputError("fixed window size must be odd and >= 3");
  if (!(veg.geometry() == dsm.geometry())) throw InputError("vegetation mask and DSM must share geometry");
  const int w = size / 2;
  const Grid mx = detail::square_max(dsm, w);
  std::vector<TreetopCandidate> out;
  for (std::size_t i = 0; i < dsm.size(); ++i) {
    if (!veg[i] || dsm.is_nodata(i) || dsm[i] != mx[i]) continue;
    const Pixel p = dsm.geometry().pixel_of(i);
    if (detail::strict_window_max(dsm, p, w)) out.push_back(detail::make_candidate(dsm, p));
  }
  return out;
}

struct SlopeBreakParams {
  // A transect breaks once the surface climbs this far above the lowest
  // value seen so far along it.
  double rise_tolerance = 0.5;
};

// Variable-window local maxima. Every strict 3x3 maximum in vegetation casts
// eight compass transects; each runs until the surface climbs more than
// rise_tolerance above its running minimum, and the transect's break distance
// is the distance to that minimum. Transects that leave the grid or reach a
// nodata cell stop at their last valid step. The candidate survives iff it is
// strictly above every valid cell within the smallest break distance (at
// least 1 px).
inline std::vector<TreetopCandidate> detect_slope_break(const Grid& dsm, const Mask& veg,
                                                        const SlopeBreakParams& params = {}) {
  if (!(params.rise_tolerance >= 0.0)) throw ConfigError("slope-break rise tolerance must be >= 0");
  if (!(veg.geometry() == dsm.geometry())) throw InputError("vegetation mask and DSM must share geometry");
  const GridGeometry& geo = dsm.geometry();
  static constexpr std::array<Offset, 8> kDirs{{{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

  std::vector<TreetopCandidate> out;
  for (int r = 0; r < geo.height; ++r) {
    for (int c = 0; c < geo.width; ++c) {
      if (!veg(r, c) || dsm.is_nodata(r, c)) continue;
      const Pixel p{r, c};
      if (!detail::strict_window_max(dsm, p, 1)) continue;
      const double v0 = dsm(p);
      double radius = std::numeric_limits<double>::infinity();
      for (const Offset& d : kDirs) {
        const double step_len = (d.dr != 0 && d.dc != 0) ? std::sqrt(2.0) : 1.0;
        double run_min = v0;
        int min_step = 0, step = 0;
        while (true) {
          const int rr = r + (step + 1) * d.dr, cc = c + (step + 1) * d.dc;
          if (!geo.contains(rr, cc) || dsm.is_nodata(rr, cc)) {
            min_step = step;
            break;
          }
          ++step;
          const double v = dsm(rr, cc);
          if (v > run_min + params.rise_tolerance) break;
          if (v < run_min) {
            run_min = v;
            min_step = step;
          }
        }
        radius = std::min(radius, min_step * step_len);
      }
      radius = std::max(radius, 1.0);
      const int ir = static_cast<int>(std::floor(radius));
      const double r2 = radius * radius;
      bool keep = true;
      for (int dr = -ir; dr <= ir && keep; ++dr) {
        for (int dc = -ir; dc <= ir; ++dc) {
          if ((dr == 0 && dc == 0) || double(dr) * dr + double(dc) * dc > r2) continue;
          const int rr = r + dr, cc = c + dc;
          if (!geo.contains(rr, cc) || dsm.is_nodata(rr, cc)) continue;
          if (dsm(rr, cc) >= v0) {
            keep = false;
            break;
          }
        }
      }
      if (keep) out.push_back(detail::make_candidate(dsm, p));
    }
  }
  return out;
}

// Resolves above-ground height, keeps candidates at or above min_height and
// fills crown_diameter from the allometric relation.
inline std::vector<TreetopCandidate> height_filter(const std::vector<TreetopCandidate>& cands,
                                                   const HeightResolver& heights, double min_height) {
  if (!(min_height >= 0.0)) throw ConfigError("min_height must be >= 0");
  std::vector<TreetopCandidate> out;
  for (TreetopCandidate c : cands) {
    c.above_ground = heights.resolve(c.pixel);
    if (!(c.above_ground >= min_height)) continue;
    c.crown_diameter = allometric_diameter(c.above_ground);
    out.push_back(c);
  }
  return out;
}

inline std::vector<TreetopCandidate> height_filter(const std::vector<TreetopCandidate>& cands, const Grid& dsm,
                                                   const Mask& terrain, const HeightMode& mode, double min_height,
                                                   int window_radius) {
  return height_filter(cands, HeightResolver(dsm, terrain, window_radius, mode), min_height);
}

// Fills above_ground with a constant and crown_diameter accordingly, keeping
// every candidate (used when no height surface takes part in detection).
inline std::vector<TreetopCandidate> assign_constant_height(std::vector<TreetopCandidate> cands, double h) {
  for (auto& c : cands) {
    c.above_ground = h;
    c.crown_diameter = allometric_diameter(h);
  }
  return cands;
}

// Window side in pixels for a crown diameter: ceil(chi / cell_size), bumped
// to the next odd number.
inline int nms_window_side(double crown_diameter, double cell_size) {
  int side = static_cast<int>(std::ceil(crown_diameter / cell_size - 1e-9));
  side = std::max(side, 1);
  if (side % 2 == 0) ++side;
  return side;
}

// Greedy highest-first suppression. A candidate is dropped iff an already
// accepted one lies inside its own square window. Survivors keep acceptance
// order and are renumbered 1..n.
inline std::vector<TreetopCandidate> non_max_suppress(const std::vector<TreetopCandidate>& cands,
                                                      const GridGeometry& geo) {
  std::vector<TreetopCandidate> order = cands;
  for (const auto& c : order) {
    if (!std::isfinite(c.crown_diameter)) throw InputError("non-maximum suppression needs crown diameters");
    if (!geo.contains(c.pixel)) throw InputError("treetop outside the grid");
  }
  std::stable_sort(order.begin(), order.end(), [](const TreetopCandidate& a, const TreetopCandidate& b) {
    if (a.dsm_height != b.dsm_height) return a.dsm_height > b.dsm_height;
    return a.pixel < b.pixel;
  });

  // Grid of accepted candidates, scanned per candidate inside its window.
  std::vector<std::uint8_t> taken(geo.size(), 0);
  std::vector<TreetopCandidate> out;
  for (const auto& c : order) {
    const int half = (nms_window_side(c.crown_diameter, geo.cell_size) - 1) / 2;
    bool blocked = false;
    for (int r = std::max(0, c.pixel.row - half); r <= std::min(geo.height - 1, c.pixel.row + half) && !blocked; ++r) {
      for (int col = std::max(0, c.pixel.col - half); col <= std::min(geo.width - 1, c.pixel.col + half); ++col) {
        if (taken[geo.index(r, col)]) {
          blocked = true;
          break;
        }
      }
    }
    if (blocked) continue;
    taken[geo.index(c.pixel)] = 1;
    out.push_back(c);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i) + 1;
  return out;
}

inline void number_candidates(std::vector<TreetopCandidate>& cands) {
  for (std::size_t i = 0; i < cands.size(); ++i) cands[i].id = static_cast<int>(i) + 1;
}

inline std::string format_treetops_csv(const std::vector<TreetopCandidate>& tops, const GridGeometry& geo) {
  std::ostringstream out;
  out << "id,row,col,x,y,dsm_height,above_ground,crown_diameter\n";
  auto num = [](double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); };
  for (const auto& t : tops) {
    out << t.id << ',' << t.pixel.row << ',' << t.pixel.col << ',' << io::format_double(geo.x_of(t.pixel.col))
        << ',' << io::format_double(geo.y_of(t.pixel.row)) << ',' << num(t.dsm_height) << ','
        << num(t.above_ground) << ',' << num(t.crown_diameter) << '\n';
  }
  return out.str();
}

inline std::vector<TreetopCandidate> parse_treetops_csv(const std::string& text, const std::string& name = "treetops") {
  std::istringstream in(text);
  std::string line;
  std::vector<TreetopCandidate> out;
  if (!std::getline(in, line) || line.rfind("id,row,col", 0) != 0)
    throw InputError(name + ": missing treetop CSV header");
  auto field = [&](const std::string& s) {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : io::parse_double(s, name);
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() != 8) throw InputError(name + ": expected 8 columns in '" + line + "'");
    TreetopCandidate t;
    t.id = static_cast<int>(io::parse_double(cols[0], name));
    t.pixel = {static_cast<int>(io::parse_double(cols[1], name)), static_cast<int>(io::parse_double(cols[2], name))};
    t.dsm_height = field(cols[5]);
    t.above_ground = field(cols[6]);
    t.crown_diameter = field(cols[7]);
    out.push_back(t);
  }
  return out;
}

}  // namespace treecrown
