// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pixel-set <-> polygon conversion and the crown GeoJSON document.
//
// Rings follow pixel edges, so every vertex sits on a cell corner. Outer
// rings are counter-clockwise and holes clockwise in world coordinates.
// Diagonally touching pixels belong to the same ring (8-connectivity).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treecrown/error.hpp"
#include "treecrown/io.hpp"
#include "treecrown/raster.hpp"

namespace treecrown {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

using Ring = std::vector<Point2>;  // closed implicitly, first point not repeated

struct PolygonShape {
  Ring outer;
  std::vector<Ring> holes;
};

// Pixels of one crown plus the attributes exported with it.
struct CrownRecord {
  int id = 0;
  std::vector<Pixel> pixels;
  double top_height = 0.0;
};

inline double signed_area(const Ring& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point2& p = ring[i];
    const Point2& q = ring[(i + 1) % ring.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

// Even-odd test against every ring at once.
inline bool point_in_rings(const std::vector<const Ring*>& rings, Point2 pt) {
  bool inside = false;
  for (const Ring* ring : rings) {
    const std::size_t n = ring->size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point2& a = (*ring)[i];
      const Point2& b = (*ring)[j];
      if ((a.y > pt.y) != (b.y > pt.y) && pt.x < (b.x - a.x) * (pt.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
  }
  return inside;
}

namespace detail {

// Vertex (row, col) on the cell-corner lattice of a local window.
struct Corner {
  int r = 0;
  int c = 0;
  bool operator==(const Corner&) const = default;
};

inline int direction_of(Corner a, Corner b) {
  if (b.c > a.c) return 0;  // east
  if (b.r > a.r) return 1;  // south
  if (b.c < a.c) return 2;  // west
  return 3;                 // north
}

}  // namespace detail

// Traces the boundary of a pixel set into polygons in world coordinates.
inline std::vector<PolygonShape> trace_polygons(const std::vector<Pixel>& pixels, const GridGeometry& geo) {
  if (pixels.empty()) return {};
  int r0 = pixels.front().row, r1 = r0, c0 = pixels.front().col, c1 = c0;
  for (const Pixel& p : pixels) {
    if (!geo.contains(p)) throw InputError("polygon pixel outside the grid");
    r0 = std::min(r0, p.row);
    r1 = std::max(r1, p.row);
    c0 = std::min(c0, p.col);
    c1 = std::max(c1, p.col);
  }
  const int h = r1 - r0 + 1, w = c1 - c0 + 1;
  std::vector<std::uint8_t> in(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);
  auto inside = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < h && c < w && in[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)];
  };
  for (const Pixel& p : pixels) in[static_cast<std::size_t>(p.row - r0) * w + static_cast<std::size_t>(p.col - c0)] = 1;

  // Directed edges keep the set on their right in row-down coordinates.
  const int vw = w + 1;
  auto vid = [&](detail::Corner v) { return static_cast<std::size_t>(v.r) * static_cast<std::size_t>(vw) + static_cast<std::size_t>(v.c); };
  std::vector<std::array<int, 2>> out_edges(static_cast<std::size_t>(h + 1) * static_cast<std::size_t>(vw), {-1, -1});
  std::vector<std::pair<detail::Corner, detail::Corner>> edges;
  std::vector<std::uint8_t> used;
  auto add = [&](detail::Corner a, detail::Corner b) {
    auto& slot = out_edges[vid(a)];
    slot[slot[0] < 0 ? 0 : 1] = static_cast<int>(edges.size());
    edges.emplace_back(a, b);
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!inside(r, c)) continue;
      if (!inside(r - 1, c)) add({r, c}, {r, c + 1});
      if (!inside(r, c + 1)) add({r, c + 1}, {r + 1, c + 1});
      if (!inside(r + 1, c)) add({r + 1, c + 1}, {r + 1, c});
      if (!inside(r, c - 1)) add({r + 1, c}, {r, c});
    }
  }
  used.assign(edges.size(), 0);

  std::vector<Ring> outers, holes;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (used[start]) continue;
    std::vector<detail::Corner> verts;
    std::size_t e = start;
    while (!used[e]) {
      used[e] = 1;
      verts.push_back(edges[e].first);
      const detail::Corner v = edges[e].second;
      const auto& slot = out_edges[vid(v)];
      int next = slot[0];
      if (slot[1] >= 0) {
        // Saddle corner: take the left turn so diagonal pixels stay joined.
        const int in_dir = detail::direction_of(edges[e].first, v);
        const int want = (in_dir + 3) % 4;
        next = detail::direction_of(v, edges[static_cast<std::size_t>(slot[0])].second) == want ? slot[0] : slot[1];
      }
      if (next < 0) throw InternalError("open boundary while tracing polygon");
      e = static_cast<std::size_t>(next);
    }
    // Drop corners where the direction does not change.
    Ring ring;
    const std::size_t n = verts.size();
    for (std::size_t k = 0; k < n; ++k) {
      const detail::Corner prev = verts[(k + n - 1) % n], cur = verts[k], nxt = verts[(k + 1) % n];
      if (detail::direction_of(prev, cur) == detail::direction_of(cur, nxt)) continue;
      ring.push_back({geo.xll + (cur.c + c0) * geo.cell_size, geo.yll + (geo.height - (cur.r + r0)) * geo.cell_size});
    }
    // Flipping rows to world y turns the traversal clockwise; reverse it so
    // outer rings run counterclockwise and holes clockwise.
    std::reverse(ring.begin(), ring.end());
    (signed_area(ring) > 0.0 ? outers : holes).push_back(std::move(ring));
  }

  std::vector<PolygonShape> shapes(outers.size());
  for (std::size_t i = 0; i < outers.size(); ++i) shapes[i].outer = std::move(outers[i]);
  for (Ring& hole : holes) {
    // Probe the center of the set pixel along the hole's first edge; the set
    // lies to the left of each edge in world orientation.
    const Point2 a = hole[0], b = hole[1];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double ux = (b.x - a.x) / len, uy = (b.y - a.y) / len;
    const double half = 0.5 * geo.cell_size;
    const Point2 probe{a.x + half * ux - half * uy, a.y + half * uy + half * ux};
    std::size_t best = shapes.size();
    double best_area = 0.0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (!point_in_rings({&shapes[i].outer}, probe)) continue;
      const double area = signed_area(shapes[i].outer);
      if (best == shapes.size() || area < best_area) {
        best = i;
        best_area = area;
      }
    }
    if (best == shapes.size()) throw InternalError("hole without an enclosing ring");
    shapes[best].holes.push_back(std::move(hole));
  }
  return shapes;
}

// Pixels whose centers fall inside the polygons (even-odd over all rings).
inline std::vector<Pixel> rasterize_polygons(const std::vector<PolygonShape>& shapes, const GridGeometry& geo) {
  std::vector<const Ring*> rings;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : shapes) {
    rings.push_back(&s.outer);
    for (const auto& h : s.holes) rings.push_back(&h);
  }
  for (const Ring* ring : rings) {
    for (const Point2& p : *ring) {
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  std::vector<Pixel> out;
  if (rings.empty()) return out;
  const int row_lo = std::max(0, static_cast<int>(std::floor(geo.row_of(ymax))));
  const int row_hi = std::min(geo.height - 1, static_cast<int>(std::ceil(geo.row_of(ymin))));
  std::vector<double> xs;
  for (int r = row_lo; r <= row_hi; ++r) {
    const double y = geo.y_of(r);
    xs.clear();
    for (const Ring* ring : rings) {
      const std::size_t n = ring->size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = (*ring)[i];
        const Point2& b = (*ring)[j];
        if ((a.y > y) != (b.y > y)) xs.push_back((b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x);
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Centers with xs[k] < x <= xs[k+1] are inside under the half-open rule.
      const int c_lo = std::max(0, static_cast<int>(std::floor(geo.col_of(xs[k]))) + 1);
      const int c_hi = std::min(geo.width - 1, static_cast<int>(std::floor(geo.col_of(xs[k + 1]))));
      for (int c = c_lo; c <= c_hi; ++c) {
        const double x = geo.x_of(c);
        if (x > xs[k] && x <= xs[k + 1]) out.push_back({r, c});
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

inline nlohmann::json ring_json(const Ring& ring) {
  nlohmann::json coords = nlohmann::json::array();
  for (const Point2& p : ring) coords.push_back({p.x, p.y});
  if (!ring.empty()) coords.push_back({ring.front().x, ring.front().y});
  return coords;
}

inline Ring ring_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("polygon ring must be an array");
  Ring ring;
  for (const auto& pt : j) {
    if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number())
      throw InputError("polygon coordinate must be [x, y]");
    ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  if (ring.size() < 3) throw InputError("polygon ring needs at least three distinct points");
  return ring;
}

inline PolygonShape polygon_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw InputError("polygon must list at least one ring");
  PolygonShape s;
  s.outer = ring_from_json(j[0]);
  for (std::size_t k = 1; k < j.size(); ++k) s.holes.push_back(ring_from_json(j[k]));
  return s;
}

}  // namespace detail

inline std::string format_crowns_geojson(const std::vector<CrownRecord>& crowns, const GridGeometry& geo) {
  nlohmann::json features = nlohmann::json::array();
  const double cell_area = geo.cell_size * geo.cell_size;
  for (const auto& crown : crowns) {
    const auto shapes = trace_polygons(crown.pixels, geo);
    nlohmann::json geometry;
    auto poly_json = [](const PolygonShape& s) {
      nlohmann::json rings = nlohmann::json::array();
      rings.push_back(detail::ring_json(s.outer));
      for (const auto& h : s.holes) rings.push_back(detail::ring_json(h));
      return rings;
    };
    if (shapes.size() == 1) {
      geometry = {{"type", "Polygon"}, {"coordinates", poly_json(shapes.front())}};
    } else {
      nlohmann::json polys = nlohmann::json::array();
      for (const auto& s : shapes) polys.push_back(poly_json(s));
      geometry = {{"type", "MultiPolygon"}, {"coordinates", polys}};
    }
    features.push_back({{"type", "Feature"},
                        {"properties",
                         {{"id", crown.id},
                          {"area_m2", static_cast<double>(crown.pixels.size()) * cell_area},
                          {"top_height_m", crown.top_height}}},
                        {"geometry", geometry}});
  }
  nlohmann::json doc = {{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(1) + "\n";
}

// Reads a crown FeatureCollection and rasterizes each feature onto `geo`.
// Features without an id property are numbered by position (1-based).
inline std::vector<CrownRecord> parse_crowns_geojson(const std::string& text, const GridGeometry& geo,
                                                     const std::string& name = "crowns") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(name + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw InputError(name + ": expected a FeatureCollection");
  std::vector<CrownRecord> out;
  int position = 0;
  for (const auto& f : doc["features"]) {
    ++position;
    if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object())
      throw InputError(name + ": feature " + std::to_string(position) + " has no geometry");
    CrownRecord rec;
    rec.id = position;
    if (f.contains("properties") && f["properties"].is_object()) {
      const auto& props = f["properties"];
      if (props.contains("id") && props["id"].is_number_integer()) rec.id = props["id"].get<int>();
      if (props.contains("top_height_m") && props["top_height_m"].is_number())
        rec.top_height = props["top_height_m"].get<double>();
    }
    const auto& g = f["geometry"];
    const std::string type = g.value("type", "");
    if (!g.contains("coordinates")) throw InputError(name + ": geometry without coordinates");
    std::vector<PolygonShape> shapes;
    try {
      if (type == "Polygon") {
        shapes.push_back(detail::polygon_from_json(g["coordinates"]));
      } else if (type == "MultiPolygon") {
        for (const auto& p : g["coordinates"]) shapes.push_back(detail::polygon_from_json(p));
      } else {
        throw InputError("unsupported geometry type '" + type + "'");
      }
    } catch (const InputError& e) {
      throw InputError(name + ": feature " + std::to_string(position) + ": " + e.what());
    }
    rec.pixels = rasterize_polygons(shapes, geo);
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::vector<CrownRecord> read_crowns_geojson(const std::filesystem::path& path, const GridGeometry& geo) {
  return parse_crowns_geojson(io::detail::slurp(path), geo, path.string());
}

// Crown records from a label raster, one per nonzero label in ascending order.
inline std::vector<CrownRecord> crowns_from_labels(const LabelGrid& labels) {
  std::map<int, std::vector<Pixel>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 0) by_label[labels[i]].push_back(labels.geometry().pixel_of(i));
  std::vector<CrownRecord> out;
  for (auto& [id, px] : by_label) out.push_back({id, std::move(px), 0.0});
  return out;
}

}  // namespace treecrown
