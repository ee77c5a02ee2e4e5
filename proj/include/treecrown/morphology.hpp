// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Grey-level morphology over Grid: disk erosion/dilation, opening, geodesic
// reconstruction by dilation and top-hat by reconstruction.
//
// Border policy: neighborhoods are clipped to the grid, nothing is padded.
// Nodata cells never enter a min/max; a neighborhood with no valid cell
// yields nodata.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <vector>

#include "treecrown/error.hpp"
#include "treecrown/raster.hpp"

namespace treecrown {

struct Offset {
  int dr = 0;
  int dc = 0;
  bool operator==(const Offset&) const = default;
};

// Disk of integer points with dr^2 + dc^2 <= radius^2. Also kept as one
// horizontal run [-half_width(dr), half_width(dr)] per row offset, which is
// what the sliding-window kernels consume.
class StructuringElement {
 public:
  static StructuringElement disk(int radius) {
    if (radius < 1) throw InputError("structuring element radius must be >= 1");
    StructuringElement se;
    se.radius_ = radius;
    const int r2 = radius * radius;
    for (int dr = -radius; dr <= radius; ++dr) {
      int w = 0;
      while ((w + 1) * (w + 1) + dr * dr <= r2) ++w;
      se.half_widths_.push_back(w);
      for (int dc = -w; dc <= w; ++dc) se.offsets_.push_back({dr, dc});
    }
    return se;
  }

  int radius() const { return radius_; }
  const std::vector<Offset>& offsets() const { return offsets_; }
  // Index dr + radius.
  int half_width(int dr) const { return half_widths_[static_cast<std::size_t>(dr + radius_)]; }

 private:
  int radius_ = 0;
  std::vector<Offset> offsets_;
  std::vector<int> half_widths_;
};

namespace detail {

// Van Herk / Gil-Werman running extreme over [x - w, x + w], clipped.
// `identity` stands in for cells outside the line.
template <bool kMin>
void running_extreme(std::span<const double> in, int w, double identity,
                     std::vector<double>& fwd, std::vector<double>& bwd, std::span<double> out) {
  const std::size_t n = in.size();
  if (w == 0) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  const std::size_t k = static_cast<std::size_t>(2 * w + 1);
  const std::size_t len = ((n + k - 1 + static_cast<std::size_t>(2 * w)) / k) * k;
  fwd.resize(len);
  bwd.resize(len);
  auto pick = [](double a, double b) { return kMin ? (b < a ? b : a) : (b > a ? b : a); };
  auto at = [&](std::size_t j) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(j) - w;
    return (idx >= 0 && idx < static_cast<std::ptrdiff_t>(n)) ? in[static_cast<std::size_t>(idx)]
                                                               : identity;
  };
  for (std::size_t start = 0; start < len; start += k) {
    fwd[start] = at(start);
    for (std::size_t j = start + 1; j < start + k; ++j) fwd[j] = pick(fwd[j - 1], at(j));
    const std::size_t end = start + k - 1;
    bwd[end] = at(end);
    for (std::size_t j = end; j-- > start;) bwd[j] = pick(bwd[j + 1], at(j));
  }
  for (std::size_t x = 0; x < n; ++x)
    out[x] = pick(bwd[x], fwd[x + static_cast<std::size_t>(2 * w)]);
}

template <bool kMin>
Grid disk_filter(const Grid& g, const StructuringElement& se) {
  const int W = g.width();
  const int H = g.height();
  const int R = se.radius();
  const double identity = kMin ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();

  std::vector<int> widths;  // distinct half widths
  std::vector<int> width_slot(static_cast<std::size_t>(2 * R + 1));
  for (int dr = -R; dr <= R; ++dr) {
    const int w = se.half_width(dr);
    auto it = std::find(widths.begin(), widths.end(), w);
    if (it == widths.end()) {
      widths.push_back(w);
      it = widths.end() - 1;
    }
    width_slot[static_cast<std::size_t>(dr + R)] = static_cast<int>(it - widths.begin());
  }

  // ring[slot][width] holds the running extreme of one source row.
  const int ring_rows = 2 * R + 1;
  std::vector<std::vector<double>> ring(static_cast<std::size_t>(ring_rows) * widths.size(),
                                        std::vector<double>(static_cast<std::size_t>(W)));
  std::vector<double> line(static_cast<std::size_t>(W));
  std::vector<double> fwd, bwd;
  auto ring_at = [&](int src_row, std::size_t wi) -> std::vector<double>& {
    return ring[static_cast<std::size_t>(src_row % ring_rows) * widths.size() + wi];
  };
  auto load_row = [&](int src_row) {
    for (int c = 0; c < W; ++c) {
      const double v = g(src_row, c);
      line[static_cast<std::size_t>(c)] = g.is_nodata_value(v) ? identity : v;
    }
    for (std::size_t wi = 0; wi < widths.size(); ++wi)
      running_extreme<kMin>(line, widths[wi], identity, fwd, bwd, ring_at(src_row, wi));
  };

  Grid out(g.geometry(), g.nodata(), g.nodata());
  std::vector<double> acc(static_cast<std::size_t>(W));
  for (int r = 0; r < std::min(R, H); ++r) load_row(r);
  for (int r = 0; r < H; ++r) {
    if (r + R < H) load_row(r + R);
    std::fill(acc.begin(), acc.end(), identity);
    for (int dr = -R; dr <= R; ++dr) {
      const int sr = r + dr;
      if (sr < 0 || sr >= H) continue;
      const auto& src = ring_at(sr, static_cast<std::size_t>(width_slot[static_cast<std::size_t>(dr + R)]));
      for (int c = 0; c < W; ++c) {
        const double v = src[static_cast<std::size_t>(c)];
        double& a = acc[static_cast<std::size_t>(c)];
        if (kMin ? v < a : v > a) a = v;
      }
    }
    for (int c = 0; c < W; ++c) {
      const double a = acc[static_cast<std::size_t>(c)];
      if (a != identity) out(r, c) = a;
    }
  }
  return out;
}

}  // namespace detail

inline Grid erode(const Grid& g, const StructuringElement& se) {
  return detail::disk_filter<true>(g, se);
}

inline Grid dilate(const Grid& g, const StructuringElement& se) {
  return detail::disk_filter<false>(g, se);
}

inline Grid opening(const Grid& g, const StructuringElement& se) { return dilate(erode(g, se), se); }

// Geodesic reconstruction of `marker` under `mask` with the 4-connected unit
// cross; the marker is clamped to the mask first. Uses the hybrid raster-scan
// plus FIFO propagation scheme, which reaches the same fixed point as
// iterating r <- min(dilate(r), mask). Nodata mask cells are outside the
// domain and stay nodata.
inline Grid reconstruct_by_dilation(const Grid& marker, const Grid& mask) {
  if (!(marker.geometry() == mask.geometry()))
    throw InputError("reconstruction marker and mask must share geometry");
  const GridGeometry& geo = mask.geometry();
  const int W = geo.width;
  const int H = geo.height;
  const std::size_t n = geo.size();
  constexpr double kNeg = -std::numeric_limits<double>::infinity();

  std::vector<double> J(n), I(n);
  std::vector<std::uint8_t> valid(n);
  for (std::size_t i = 0; i < n; ++i) {
    valid[i] = mask.is_nodata(i) ? 0 : 1;
    I[i] = mask[i];
    J[i] = (!valid[i] || marker.is_nodata(i)) ? kNeg : std::min(marker[i], I[i]);
  }

  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const std::size_t i = geo.index(r, c);
      if (!valid[i]) continue;
      double v = J[i];
      if (r > 0 && valid[i - W]) v = std::max(v, J[i - W]);
      if (c > 0 && valid[i - 1]) v = std::max(v, J[i - 1]);
      J[i] = std::min(v, I[i]);
    }
  }

  std::deque<std::size_t> fifo;
  for (int r = H - 1; r >= 0; --r) {
    for (int c = W - 1; c >= 0; --c) {
      const std::size_t i = geo.index(r, c);
      if (!valid[i]) continue;
      double v = J[i];
      const bool has_down = r + 1 < H && valid[i + W];
      const bool has_right = c + 1 < W && valid[i + 1];
      if (has_down) v = std::max(v, J[i + W]);
      if (has_right) v = std::max(v, J[i + 1]);
      J[i] = std::min(v, I[i]);
      if ((has_down && J[i + W] < J[i] && J[i + W] < I[i + W]) ||
          (has_right && J[i + 1] < J[i] && J[i + 1] < I[i + 1]))
        fifo.push_back(i);
    }
  }

  // Equivalent to width x height naive sweeps over width x height cells.
  const std::size_t cap = n > 0 && n > std::numeric_limits<std::size_t>::max() / n
                              ? std::numeric_limits<std::size_t>::max()
                              : n * n;
  std::size_t pops = 0;
  while (!fifo.empty()) {
    if (++pops > cap) throw InternalError("reconstruction by dilation failed to converge");
    const std::size_t p = fifo.front();
    fifo.pop_front();
    const int r = static_cast<int>(p / static_cast<std::size_t>(W));
    const int c = static_cast<int>(p % static_cast<std::size_t>(W));
    const std::size_t nbrs[4] = {r > 0 ? p - W : n, r + 1 < H ? p + W : n, c > 0 ? p - 1 : n,
                                 c + 1 < W ? p + 1 : n};
    for (std::size_t q : nbrs) {
      if (q == n || !valid[q]) continue;
      if (J[q] < J[p] && I[q] != J[q]) {
        J[q] = std::min(J[p], I[q]);
        fifo.push_back(q);
      }
    }
  }

  Grid out(geo, mask.nodata(), mask.nodata());
  for (std::size_t i = 0; i < n; ++i)
    if (valid[i] && J[i] != kNeg) out[i] = J[i];
  return out;
}

// dsm - reconstruct(erode(dsm), dsm): blob-shaped peaks narrower than the SE
// get a positive response, flat and broad structures map to zero.
inline Grid top_hat_reconstruction(const Grid& dsm, const StructuringElement& se) {
  const Grid recon = reconstruct_by_dilation(erode(dsm, se), dsm);
  Grid out(dsm.geometry(), dsm.nodata(), dsm.nodata());
  for (std::size_t i = 0; i < dsm.size(); ++i) {
    if (dsm.is_nodata(i) || recon.is_nodata(i)) continue;
    out[i] = std::max(0.0, dsm[i] - recon[i]);
  }
  return out;
}

enum class Connectivity { Four, Eight };

// Labels 1..n in raster-scan order of each component's first pixel; 0 is background.
inline LabelGrid label_components(const Mask& mask, Connectivity conn, int* count = nullptr) {
  const GridGeometry& geo = mask.geometry();
  LabelGrid labels(geo, 0, -1);
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t seed = 0; seed < geo.size(); ++seed) {
    if (!mask[seed] || labels[seed] != 0) continue;
    ++next;
    labels[seed] = next;
    stack.push_back(seed);
    while (!stack.empty()) {
      const Pixel p = geo.pixel_of(stack.back());
      stack.pop_back();
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (conn == Connectivity::Four && dr != 0 && dc != 0) continue;
          const int rr = p.row + dr, cc = p.col + dc;
          if (!geo.contains(rr, cc)) continue;
          const std::size_t q = geo.index(rr, cc);
          if (!mask[q] || labels[q] != 0) continue;
          labels[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

}  // namespace treecrown
