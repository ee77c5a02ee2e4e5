// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// One-to-one crown matching and detection/delineation accuracy metrics.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "treecrown/error.hpp"
#include "treecrown/io.hpp"
#include "treecrown/polygon.hpp"
#include "treecrown/raster.hpp"

namespace treecrown {

// 2 a_o / (a_r + a_p).
inline double overlap_ratio(double a_o, double a_r, double a_p) {
  if (!(a_r > 0.0) || !(a_p > 0.0)) throw InputError("crown areas must be positive");
  if (!(a_o >= 0.0) || a_o > std::min(a_r, a_p)) throw InputError("overlap area must lie in [0, min(a_r, a_p)]");
  return 2.0 * a_o / (a_r + a_p);
}

struct MatchPair {
  int ref_id = 0;
  int pred_id = 0;
  double overlap = 0.0;  // OR
};

struct MatchReport {
  std::vector<MatchPair> pairs;
  int n_tp = 0;
  int n_fp = 0;
  int n_fn = 0;
  double da = 0.0;     // detection accuracy, equal to recall r
  double e_com = 0.0;
  double e_om = 0.0;
  double precision = 0.0;
  double f_score = 0.0;
  double ca = 0.0;     // mean OR over matched pairs
  bool f_undefined = false;
  bool ca_undefined = false;
};

// Every (ref, pred) pair sharing at least one pixel, with its OR.
inline std::vector<MatchPair> overlap_table(const std::vector<CrownRecord>& refs, const std::vector<CrownRecord>& preds,
                                            const GridGeometry& geo) {
  // Per-pixel lists of the references covering it, in CSR form.
  std::vector<std::uint32_t> start(geo.size() + 1, 0);
  for (const auto& r : refs)
    for (const Pixel& p : r.pixels) {
      if (!geo.contains(p)) throw InputError("reference crown pixel outside the grid");
      ++start[geo.index(p) + 1];
    }
  for (std::size_t i = 0; i < geo.size(); ++i) start[i + 1] += start[i];
  std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
  std::vector<std::uint32_t> owner(start.back());
  for (std::size_t k = 0; k < refs.size(); ++k)
    for (const Pixel& p : refs[k].pixels) owner[fill[geo.index(p)]++] = static_cast<std::uint32_t>(k);

  std::vector<MatchPair> out;
  std::vector<std::int64_t> shared(refs.size(), 0);
  std::vector<std::uint32_t> touched;
  for (const auto& pred : preds) {
    if (pred.pixels.empty()) continue;
    touched.clear();
    for (const Pixel& p : pred.pixels) {
      if (!geo.contains(p)) throw InputError("predicted crown pixel outside the grid");
      const std::size_t i = geo.index(p);
      for (std::uint32_t s = start[i]; s < start[i + 1]; ++s) {
        if (shared[owner[s]]++ == 0) touched.push_back(owner[s]);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t k : touched) {
      const auto a_o = static_cast<double>(shared[k]);
      out.push_back({refs[k].id, pred.id,
                     overlap_ratio(a_o, static_cast<double>(refs[k].pixels.size()), static_cast<double>(pred.pixels.size()))});
      shared[k] = 0;
    }
  }
  return out;
}

// Greedy one-to-one matching in descending OR (ties toward smaller ref id,
// then smaller pred id); pairs below gamma are never matched.
inline std::vector<MatchPair> greedy_match(std::vector<MatchPair> table, double gamma) {
  std::sort(table.begin(), table.end(), [](const MatchPair& a, const MatchPair& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.ref_id != b.ref_id) return a.ref_id < b.ref_id;
    return a.pred_id < b.pred_id;
  });
  std::set<int> used_ref, used_pred;
  std::vector<MatchPair> out;
  for (const auto& m : table) {
    if (m.overlap < gamma) break;
    if (used_ref.contains(m.ref_id) || used_pred.contains(m.pred_id)) continue;
    used_ref.insert(m.ref_id);
    used_pred.insert(m.pred_id);
    out.push_back(m);
  }
  return out;
}

inline MatchReport compute_metrics(const std::vector<MatchPair>& pairs, int n_refs, int n_preds) {
  if (n_refs <= 0) throw InputError("metrics need at least one reference crown");
  if (n_preds < 0) throw InputError("prediction count must be >= 0");
  const int n_tp = static_cast<int>(pairs.size());
  if (n_tp > n_refs || n_tp > n_preds) throw InputError("more matched pairs than crowns");
  MatchReport m;
  m.pairs = pairs;
  m.n_tp = n_tp;
  m.n_fp = n_preds - n_tp;
  m.n_fn = n_refs - n_tp;
  m.da = static_cast<double>(n_tp) / static_cast<double>(n_refs);
  m.e_om = 1.0 - m.da;
  if (n_preds > 0) {
    m.precision = static_cast<double>(n_tp) / static_cast<double>(n_preds);
    m.e_com = 1.0 - m.precision;
  }
  if (m.da + m.precision > 0.0) {
    m.f_score = 2.0 * m.da * m.precision / (m.da + m.precision);
  } else {
    m.f_undefined = true;
  }
  if (n_tp > 0) {
    double s = 0.0;
    for (const auto& p : pairs) s += p.overlap;
    m.ca = s / n_tp;
  } else {
    m.ca_undefined = true;
  }
  return m;
}

// Counts-only form: pairs carry no OR values, so CA stays 0.
inline MatchReport compute_metrics(int n_tp, int n_fp, int n_fn) {
  if (n_tp < 0 || n_fp < 0 || n_fn < 0) throw InputError("counts must be >= 0");
  std::vector<MatchPair> pairs(static_cast<std::size_t>(n_tp));
  MatchReport m = compute_metrics(pairs, n_tp + n_fn, n_tp + n_fp);
  m.ca = 0.0;
  return m;
}

inline MatchReport evaluate_crowns(const std::vector<CrownRecord>& refs, const std::vector<CrownRecord>& preds,
                                   const GridGeometry& geo, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  return compute_metrics(greedy_match(overlap_table(refs, preds, geo), gamma), static_cast<int>(refs.size()),
                         static_cast<int>(preds.size()));
}

struct MetricsRow {
  std::string detector;
  MatchReport report;
};

inline std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "detector,Np,DA,e_com,e_om,CA,P,F\n";
  for (const auto& r : rows) {
    const MatchReport& m = r.report;
    out << r.detector << ',' << (m.n_tp + m.n_fp) << ',' << io::format_double(m.da) << ','
        << io::format_double(m.e_com) << ',' << io::format_double(m.e_om) << ',' << io::format_double(m.ca) << ','
        << io::format_double(m.precision) << ',' << io::format_double(m.f_score) << '\n';
  }
  return out.str();
}

}  // namespace treecrown
