// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// ESRI ASCII grid reader/writer and the multiband manifest format.
//
// Grid files carry the usual six header lines (ncols, nrows, xllcorner,
// yllcorner, cellsize, NODATA_value) followed by nrows lines of ncols
// whitespace-separated values, northernmost row first. Values are written in
// shortest round-trip form, so finite doubles survive a write/read cycle
// bit-exactly. xllcenter/yllcenter headers are accepted on read.
//
// A band manifest is a plain text file: one band grid path per line (relative
// paths resolve against the manifest's directory), plus ROLE=index lines with
// zero-based band indices, e.g. RED=4 and NIR=6. Blank lines and lines
// starting with '#' are ignored.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "treecrown/error.hpp"
#include "treecrown/raster.hpp"

namespace treecrown::io {

// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw InternalError("failed to format number");
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  // from_chars rejects a leading '+'.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InputError(context + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

namespace detail {

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}
  bool next(std::string_view& tok) {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ >= text_.size()) return false;
    std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    tok = text_.substr(start, pos_ - start);
    return true;
  }
  std::size_t position() const { return pos_; }
  void rewind(std::size_t pos) { pos_ = pos; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void write_header(std::ostream& out, const GridGeometry& g, const std::string& nodata) {
  out << "ncols " << g.width << '\n'
      << "nrows " << g.height << '\n'
      << "xllcorner " << format_double(g.xll) << '\n'
      << "yllcorner " << format_double(g.yll) << '\n'
      << "cellsize " << format_double(g.cell_size) << '\n'
      << "NODATA_value " << nodata << '\n';
}

}  // namespace detail

inline Grid parse_ascii_grid(std::string_view text, const std::string& name = "grid") {
  detail::Tokenizer tok(text);
  GridGeometry g;
  double nodata = kDefaultNodata;
  bool have_cols = false, have_rows = false, have_x = false, have_y = false, have_cs = false;
  bool x_center = false, y_center = false;
  std::string_view key, val;
  while (true) {
    std::size_t mark = tok.position();
    if (!tok.next(key)) break;
    const std::string k = lower(std::string(key));
    const bool known = k == "ncols" || k == "nrows" || k == "xllcorner" || k == "yllcorner" ||
                       k == "xllcenter" || k == "yllcenter" || k == "cellsize" ||
                       k == "nodata_value";
    if (!known) {
      tok.rewind(mark);
      break;
    }
    if (!tok.next(val)) throw InputError(name + ": header key " + k + " has no value");
    const double v = parse_double(val, name);
    if (k == "ncols") {
      g.width = static_cast<int>(v);
      have_cols = true;
    } else if (k == "nrows") {
      g.height = static_cast<int>(v);
      have_rows = true;
    } else if (k == "xllcorner" || k == "xllcenter") {
      g.xll = v;
      x_center = k == "xllcenter";
      have_x = true;
    } else if (k == "yllcorner" || k == "yllcenter") {
      g.yll = v;
      y_center = k == "yllcenter";
      have_y = true;
    } else if (k == "cellsize") {
      g.cell_size = v;
      have_cs = true;
    } else {
      nodata = v;
    }
  }
  if (!(have_cols && have_rows && have_x && have_y && have_cs))
    throw InputError(name + ": incomplete ASCII grid header");
  if (x_center) g.xll -= 0.5 * g.cell_size;
  if (y_center) g.yll -= 0.5 * g.cell_size;
  g.validate();

  std::vector<double> values;
  values.reserve(g.size());
  while (values.size() < g.size() && tok.next(val)) values.push_back(parse_double(val, name));
  if (values.size() != g.size())
    throw InputError(name + ": expected " + std::to_string(g.size()) + " values, found " +
                     std::to_string(values.size()));
  if (tok.next(val)) throw InputError(name + ": trailing data after grid values");
  return Grid(g, std::move(values), nodata);
}

inline Grid read_ascii_grid(const std::filesystem::path& path) {
  return parse_ascii_grid(detail::slurp(path), path.string());
}

inline std::string format_ascii_grid(const Grid& grid) {
  std::ostringstream out;
  const std::string nd = format_double(grid.nodata());
  detail::write_header(out, grid.geometry(), nd);
  for (int r = 0; r < grid.height(); ++r) {
    for (int c = 0; c < grid.width(); ++c) {
      if (c) out << ' ';
      out << (grid.is_nodata(r, c) ? nd : format_double(grid(r, c)));
    }
    out << '\n';
  }
  return out.str();
}

inline std::string format_ascii_grid(const LabelGrid& grid) {
  std::ostringstream out;
  detail::write_header(out, grid.geometry(), std::to_string(grid.nodata()));
  for (int r = 0; r < grid.height(); ++r) {
    for (int c = 0; c < grid.width(); ++c) {
      if (c) out << ' ';
      out << grid(r, c);
    }
    out << '\n';
  }
  return out.str();
}

// 0/1 grid; masks have no missing cells, the header still names the default sentinel.
inline std::string format_ascii_grid(const Mask& mask) {
  std::ostringstream out;
  detail::write_header(out, mask.geometry(), "-9999");
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (c) out << ' ';
      out << (mask(r, c) ? '1' : '0');
    }
    out << '\n';
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) { return detail::slurp(path); }

template <typename R>
void write_ascii_grid(const std::filesystem::path& path, const R& raster) {
  write_text(path, format_ascii_grid(raster));
}

inline LabelGrid to_label_grid(const Grid& g) {
  LabelGrid out(g.geometry(), 0, static_cast<std::int32_t>(g.nodata()));
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<std::int32_t>(g[i]);
  return out;
}

inline Mask to_mask(const Grid& g) {
  Mask out(g.geometry());
  for (std::size_t i = 0; i < g.size(); ++i) out.set(i, !g.is_nodata(i) && g[i] != 0.0);
  return out;
}

struct BandManifest {
  std::vector<std::filesystem::path> bands;
  std::vector<std::pair<std::string, std::size_t>> roles;
};

inline BandManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  BandManifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t\r");
    std::string body = line.substr(first, last - first + 1);
    auto eq = body.find('=');
    if (eq != std::string::npos) {
      std::string role = body.substr(0, eq);
      std::string idx = body.substr(eq + 1);
      role.erase(role.find_last_not_of(" \t") + 1);
      idx.erase(0, idx.find_first_not_of(" \t"));
      std::transform(role.begin(), role.end(), role.begin(),
                     [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
      std::size_t v = 0;
      auto res = std::from_chars(idx.data(), idx.data() + idx.size(), v);
      if (role.empty() || res.ec != std::errc{} || res.ptr != idx.data() + idx.size())
        throw ConfigError("manifest line " + std::to_string(lineno) + ": bad role assignment '" +
                          body + "'");
      m.roles.emplace_back(role, v);
    } else {
      std::filesystem::path p(body);
      m.bands.push_back(p.is_absolute() ? p : base_dir / p);
    }
  }
  return m;
}

inline MultibandRaster read_multiband(const std::filesystem::path& manifest_path) {
  const BandManifest m =
      parse_manifest(detail::slurp(manifest_path), manifest_path.parent_path());
  if (m.bands.empty()) throw ConfigError(manifest_path.string() + ": manifest lists no bands");
  MultibandRaster raster;
  for (const auto& p : m.bands) raster.add_band(read_ascii_grid(p));
  for (const auto& [role, idx] : m.roles) raster.assign_role(role, idx);
  return raster;
}

// Writes band_<i>.asc files next to the manifest and the manifest itself.
inline void write_multiband(const std::filesystem::path& manifest_path,
                            const MultibandRaster& raster) {
  std::ostringstream man;
  man << "# band grids in order, then zero-based role assignments\n";
  const auto dir = manifest_path.parent_path();
  for (std::size_t i = 0; i < raster.band_count(); ++i) {
    const std::string name = "band_" + std::to_string(i) + ".asc";
    write_ascii_grid(dir / name, raster.band(i));
    man << name << '\n';
  }
  for (const auto& [role, idx] : raster.roles()) man << role << '=' << idx << '\n';
  write_text(manifest_path, man.str());
}

}  // namespace treecrown::io
