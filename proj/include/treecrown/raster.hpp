// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Raster containers shared by every stage: grid geometry, single-band grids,
// binary masks and co-registered multiband imagery, plus NDVI band math.

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "treecrown/error.hpp"

namespace treecrown {

inline constexpr double kDefaultNodata = -9999.0;

struct Pixel {
  int row = 0;
  int col = 0;

  auto operator<=>(const Pixel&) const = default;
};

// Row 0 is the northernmost row. World coordinates refer to pixel centers;
// (xll, yll) is the lower-left corner of the lower-left cell, as in ESRI
// ASCII grids.
struct GridGeometry {
  int width = 0;
  int height = 0;
  double cell_size = 1.0;
  double xll = 0.0;
  double yll = 0.0;

  bool operator==(const GridGeometry&) const = default;

  std::size_t size() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < height && col < width;
  }
  bool contains(Pixel p) const { return contains(p.row, p.col); }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col);
  }
  std::size_t index(Pixel p) const { return index(p.row, p.col); }
  Pixel pixel_of(std::size_t i) const {
    return {static_cast<int>(i / static_cast<std::size_t>(width)),
            static_cast<int>(i % static_cast<std::size_t>(width))};
  }
  double x_of(double col) const { return xll + (col + 0.5) * cell_size; }
  double y_of(double row) const { return yll + (height - row - 0.5) * cell_size; }
  // Fractional (row, col) of a world coordinate; pixel centers map to integers.
  double col_of(double x) const { return (x - xll) / cell_size - 0.5; }
  double row_of(double y) const { return height - 0.5 - (y - yll) / cell_size; }

  void validate() const {
    if (width <= 0 || height <= 0) throw InputError("grid dimensions must be positive");
    if (!(cell_size > 0.0) || !std::isfinite(cell_size))
      throw InputError("grid cell size must be positive");
    if (!std::isfinite(xll) || !std::isfinite(yll)) throw InputError("grid origin must be finite");
  }
};

template <typename T>
constexpr T default_nodata() {
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<T>(kDefaultNodata);
  } else {
    return static_cast<T>(-9999);
  }
}

// Dense row-major raster. Cells equal to the nodata sentinel (or NaN for
// floating point types) are treated as missing by every reduction.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  explicit Raster(GridGeometry geometry, T fill = T{}, T nodata = default_nodata<T>())
      : geometry_(geometry), nodata_(nodata) {
    geometry_.validate();
    values_.assign(geometry_.size(), fill);
  }
  Raster(GridGeometry geometry, std::vector<T> values, T nodata)
      : geometry_(geometry), values_(std::move(values)), nodata_(nodata) {
    geometry_.validate();
    if (values_.size() != geometry_.size())
      throw InputError("raster value count does not match width x height");
  }

  const GridGeometry& geometry() const { return geometry_; }
  int width() const { return geometry_.width; }
  int height() const { return geometry_.height; }
  double cell_size() const { return geometry_.cell_size; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T nodata() const { return nodata_; }
  void set_nodata(T value) { nodata_ = value; }

  T& operator()(int row, int col) { return values_[geometry_.index(row, col)]; }
  const T& operator()(int row, int col) const { return values_[geometry_.index(row, col)]; }
  T& operator()(Pixel p) { return values_[geometry_.index(p)]; }
  const T& operator()(Pixel p) const { return values_[geometry_.index(p)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::span<const T> row(int r) const {
    return std::span<const T>(values_).subspan(geometry_.index(r, 0),
                                               static_cast<std::size_t>(geometry_.width));
  }

  bool is_nodata_value(T v) const {
    if constexpr (std::is_floating_point_v<T>) {
      return std::isnan(v) || v == nodata_;
    } else {
      return v == nodata_;
    }
  }
  bool is_nodata(std::size_t i) const { return is_nodata_value(values_[i]); }
  bool is_nodata(int row, int col) const { return is_nodata_value((*this)(row, col)); }
  bool is_nodata(Pixel p) const { return is_nodata_value((*this)(p)); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (const T& v : values_) n += is_nodata_value(v) ? 0 : 1;
    return n;
  }

  // Min and max over valid cells; nullopt when every cell is nodata.
  std::optional<std::pair<T, T>> min_max() const {
    std::optional<std::pair<T, T>> out;
    for (const T& v : values_) {
      if (is_nodata_value(v)) continue;
      if (!out) {
        out.emplace(v, v);
      } else {
        out->first = std::min(out->first, v);
        out->second = std::max(out->second, v);
      }
    }
    return out;
  }

 private:
  GridGeometry geometry_;
  std::vector<T> values_;
  T nodata_ = default_nodata<T>();
};

using Grid = Raster<double>;
using LabelGrid = Raster<std::int32_t>;

class Mask {
 public:
  Mask() = default;
  explicit Mask(GridGeometry geometry, bool fill = false) : geometry_(geometry) {
    geometry_.validate();
    bits_.assign(geometry_.size(), fill ? 1 : 0);
  }

  const GridGeometry& geometry() const { return geometry_; }
  int width() const { return geometry_.width; }
  int height() const { return geometry_.height; }
  std::size_t size() const { return bits_.size(); }

  bool operator()(int row, int col) const { return bits_[geometry_.index(row, col)] != 0; }
  bool operator()(Pixel p) const { return bits_[geometry_.index(p)] != 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(int row, int col, bool v) { bits_[geometry_.index(row, col)] = v ? 1 : 0; }
  void set(Pixel p, bool v) { bits_[geometry_.index(p)] = v ? 1 : 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool operator==(const Mask&) const = default;

 private:
  GridGeometry geometry_;
  std::vector<std::uint8_t> bits_;
};

inline bool same_geometry(const GridGeometry& a, const GridGeometry& b) { return a == b; }

// Co-registered bands plus a role table ("RED", "NIR", ...) naming bands by index.
class MultibandRaster {
 public:
  MultibandRaster() = default;

  void add_band(Grid band) {
    if (!bands_.empty() && !(band.geometry() == bands_.front().geometry()))
      throw InputError("band geometry differs from the first band");
    bands_.push_back(std::move(band));
  }
  void assign_role(const std::string& role, std::size_t band_index) {
    if (band_index >= bands_.size())
      throw ConfigError("role " + role + " refers to missing band " + std::to_string(band_index));
    roles_[role] = band_index;
  }

  std::size_t band_count() const { return bands_.size(); }
  bool empty() const { return bands_.empty(); }
  const Grid& band(std::size_t i) const { return bands_.at(i); }
  const std::vector<Grid>& bands() const { return bands_; }
  const GridGeometry& geometry() const {
    if (bands_.empty()) throw InputError("multiband raster has no bands");
    return bands_.front().geometry();
  }

  std::optional<std::size_t> role(const std::string& name) const {
    auto it = roles_.find(name);
    if (it == roles_.end()) return std::nullopt;
    return it->second;
  }
  const Grid& band_for(const std::string& role_name) const {
    auto idx = role(role_name);
    if (!idx) throw ConfigError("band role " + role_name + " is not assigned");
    return bands_[*idx];
  }
  const std::map<std::string, std::size_t>& roles() const { return roles_; }

  // True when any band is nodata at cell i.
  bool any_nodata(std::size_t i) const {
    for (const auto& b : bands_)
      if (b.is_nodata(i)) return true;
    return false;
  }

 private:
  std::vector<Grid> bands_;
  std::map<std::string, std::size_t> roles_;
};

// (NIR - RED) / (NIR + RED). Cells where either band is nodata or the sum is
// zero become nodata.
inline Grid ndvi(const MultibandRaster& raster) {
  if (!raster.role("RED") || !raster.role("NIR"))
    throw ConfigError("NDVI needs both RED and NIR band roles");
  const Grid& red = raster.band_for("RED");
  const Grid& nir = raster.band_for("NIR");
  Grid out(red.geometry(), kDefaultNodata, kDefaultNodata);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (red.is_nodata(i) || nir.is_nodata(i)) continue;
    const double r = red[i];
    const double n = nir[i];
    if (r < 0.0 || n < 0.0) throw InputError("NDVI input bands must be non-negative");
    const double sum = n + r;
    if (sum == 0.0) continue;
    out[i] = std::clamp((n - r) / sum, -1.0, 1.0);
  }
  return out;
}

// Bit set iff NDVI > mu (strict) and NDVI is valid.
inline Mask vegetation_mask(const Grid& ndvi_grid, double mu) {
  if (!(mu >= -1.0 && mu <= 1.0)) throw InputError("vegetation threshold must lie in [-1, 1]");
  Mask out(ndvi_grid.geometry());
  for (std::size_t i = 0; i < ndvi_grid.size(); ++i) {
    if (ndvi_grid.is_nodata(i)) continue;
    if (ndvi_grid[i] > mu) out.set(i, true);
  }
  return out;
}

}  // namespace treecrown
