// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration: configuration, input loading, the stage
// sequence, comparison runs and artifact emission.
//
// Stage order: vegetation mask, terrain classification, treetop detection,
// height check, non-maximum suppression, crown delineation, postprocessing
// and, when reference crowns are available, evaluation.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "treecrown/crowns.hpp"
#include "treecrown/error.hpp"
#include "treecrown/eval.hpp"
#include "treecrown/io.hpp"
#include "treecrown/morphology.hpp"
#include "treecrown/polygon.hpp"
#include "treecrown/raster.hpp"
#include "treecrown/synth.hpp"
#include "treecrown/terrain.hpp"
#include "treecrown/treetops.hpp"

namespace treecrown {

struct PipelineConfig {
  // Inputs: either dsm + bands files, or a synthetic scene.
  std::string dsm;
  std::string bands;
  std::string reference;  // crown GeoJSON, optional
  std::optional<SceneSpec> scene;

  double mu = 0.3;
  int se_radius = 8;
  int opening_se_radius = 2;
  double thr_min_response = 0.3;  // meters; 3d mode only
  DetectorKind detector = DetectorKind::thr();
  SlopeBreakParams slope_break;

  CsfParams csf;
  HeightMode height_mode = HeightMode::dtm();
  std::optional<HeightMode> dtm_fallback;
  double terrain_window_m = 15.0;
  double min_height = 2.0;

  SegmentationParams segmentation;
  PostprocessParams postprocess;
  double gamma = 0.3;

  bool two_d = false;          // detect on the RED band, no vertical term, no height check
  double two_d_height = 10.0;  // height used for crown size in that mode

  std::string out = "out";

  void validate() const {
    const bool files = !dsm.empty() || !bands.empty();
    if (files && scene) throw ConfigError("give either dsm/bands files or a synthetic scene, not both");
    if (!files && !scene) throw ConfigError("no input: set dsm and bands, or scene");
    if (files && bands.empty()) throw ConfigError("bands manifest path is required");
    if (files && dsm.empty() && !two_d) throw ConfigError("dsm path is required");
    if (!(mu >= -1.0 && mu <= 1.0)) throw ConfigError("mu must lie in [-1, 1]");
    if (se_radius < 1) throw ConfigError("se_radius must be >= 1");
    if (opening_se_radius < 1) throw ConfigError("opening_se_radius must be >= 1");
    if (!(thr_min_response >= 0.0)) throw ConfigError("thr_min_response must be >= 0");
    if (!(slope_break.rise_tolerance >= 0.0)) throw ConfigError("sb_rise_tolerance must be >= 0");
    csf.validate();
    height_mode.validate();
    if (dtm_fallback) {
      if (dtm_fallback->kind == HeightMode::Kind::Dtm) throw ConfigError("dtm_fallback must not be dtm");
      dtm_fallback->validate();
    }
    if (!(terrain_window_m > 0.0)) throw ConfigError("terrain_window_m must be > 0");
    if (!(min_height >= 0.0)) throw ConfigError("min_height must be >= 0");
    segmentation.validate();
    if (!(postprocess.neighborhood_radius >= 0.0)) throw ConfigError("neighborhood_radius must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
    if (!(two_d_height >= 0.0)) throw ConfigError("two_d_height must be >= 0");
    if (scene) scene->validate();
  }
};

// ---------------------------------------------------------------------------
// Key/value registry. One table drives config files, command-line overrides
// and --print-config.

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

namespace config_detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v, key);
  } catch (const InputError&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline std::string num(double v) { return io::format_double(v); }

inline SceneSpec& scene_of(PipelineConfig& c) {
  if (!c.scene) c.scene = SceneSpec{};
  return *c.scene;
}

inline std::string scene_get(const PipelineConfig& c, const std::function<std::string(const SceneSpec&)>& f) {
  return c.scene ? f(*c.scene) : f(SceneSpec{});
}

}  // namespace config_detail

inline const std::vector<ConfigKey>& config_keys() {
  using namespace config_detail;
  using C = PipelineConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto real = [&k](std::string name, std::string help, double C::*field) {
      k.push_back({name, help, [field](const C& c) { return num(c.*field); },
                   [field, name](C& c, const std::string& v) { c.*field = to_double(name, v); }});
    };
    auto text = [&k](std::string name, std::string help, std::string C::*field) {
      k.push_back({name, help, [field](const C& c) { return c.*field; },
                   [field](C& c, const std::string& v) { c.*field = v; }});
    };
    auto scene_real = [&k](std::string name, std::string help, double SceneSpec::*field) {
      k.push_back({name, help, [field](const C& c) { return scene_get(c, [field](const SceneSpec& s) { return num(s.*field); }); },
                   [field, name](C& c, const std::string& v) { scene_of(c).*field = to_double(name, v); }});
    };
    auto scene_int = [&k](std::string name, std::string help, int SceneSpec::*field) {
      k.push_back({name, help,
                   [field](const C& c) { return scene_get(c, [field](const SceneSpec& s) { return std::to_string(s.*field); }); },
                   [field, name](C& c, const std::string& v) { scene_of(c).*field = to_int(name, v); }});
    };

    text("dsm", "DSM ASCII grid path", &C::dsm);
    text("bands", "band manifest path", &C::bands);
    text("reference", "reference crown GeoJSON path (enables evaluation)", &C::reference);
    k.push_back({"scene", "synthetic scene density: none, sparse, dense or urban",
                 [](const C& c) { return c.scene ? to_string(c.scene->density) : std::string("none"); },
                 [](C& c, const std::string& v) {
                   if (io::lower(v) == "none") {
                     c.scene.reset();
                   } else {
                     const Density d = parse_density(v);
                     SceneSpec& s = scene_of(c);
                     s.density = d;
                   }
                 }});
    scene_int("scene_width", "synthetic scene width in pixels", &SceneSpec::width);
    scene_int("scene_height", "synthetic scene height in pixels", &SceneSpec::height);
    scene_real("scene_cell_size", "synthetic scene cell size in meters", &SceneSpec::cell_size);
    scene_int("scene_trees", "number of synthetic trees", &SceneSpec::n_trees);
    scene_real("scene_height_min", "lowest synthetic tree height in meters", &SceneSpec::height_min);
    scene_real("scene_height_max", "tallest synthetic tree height in meters", &SceneSpec::height_max);
    scene_real("scene_terrain_amplitude", "terrain undulation in meters", &SceneSpec::terrain_amplitude);
    scene_real("scene_terrain_slope", "terrain slope in degrees", &SceneSpec::terrain_slope_deg);
    scene_real("scene_noise", "DSM noise standard deviation in meters", &SceneSpec::noise_sigma);
    k.push_back({"scene_seed", "synthetic scene random seed",
                 [](const C& c) { return scene_get(c, [](const SceneSpec& s) { return std::to_string(s.seed); }); },
                 [](C& c, const std::string& v) {
                   std::uint64_t seed = 0;
                   auto res = std::from_chars(v.data(), v.data() + v.size(), seed);
                   if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
                     throw ConfigError("scene_seed: expected a non-negative integer, got '" + v + "'");
                   scene_of(c).seed = seed;
                 }});
    scene_real("scene_max_overlap", "largest crown overlap in dense scenes", &SceneSpec::max_overlap);
    scene_int("scene_roofs", "number of roofs (-1: density default)", &SceneSpec::n_roofs);
    scene_int("scene_grass", "number of grass patches", &SceneSpec::n_grass);

    real("mu", "NDVI vegetation threshold", &C::mu);
    k.push_back({"se_radius", "top-hat structuring element radius in pixels",
                 [](const C& c) { return std::to_string(c.se_radius); },
                 [](C& c, const std::string& v) { c.se_radius = to_int("se_radius", v); }});
    k.push_back({"opening_se_radius", "opening structuring element radius in pixels",
                 [](const C& c) { return std::to_string(c.opening_se_radius); },
                 [](C& c, const std::string& v) { c.opening_se_radius = to_int("opening_se_radius", v); }});
    real("thr_min_response", "smallest top-hat response in meters kept by THR (3d mode)", &C::thr_min_response);
    k.push_back({"detector", "treetop detector: thr, fixed:N or sb",
                 [](const C& c) { return c.detector.to_string(); },
                 [](C& c, const std::string& v) { c.detector = DetectorKind::parse(v); }});
    k.push_back({"sb_rise_tolerance", "slope-break rise tolerance in surface units",
                 [](const C& c) { return num(c.slope_break.rise_tolerance); },
                 [](C& c, const std::string& v) { c.slope_break.rise_tolerance = to_double("sb_rise_tolerance", v); }});

    k.push_back({"csf_resolution", "cloth node spacing in meters", [](const C& c) { return num(c.csf.cloth_resolution); },
                 [](C& c, const std::string& v) { c.csf.cloth_resolution = to_double("csf_resolution", v); }});
    k.push_back({"csf_rigidness", "cloth rigidness 1..3", [](const C& c) { return std::to_string(c.csf.rigidness); },
                 [](C& c, const std::string& v) { c.csf.rigidness = to_int("csf_rigidness", v); }});
    k.push_back({"csf_iterations", "cloth gravity iterations",
                 [](const C& c) { return std::to_string(c.csf.gravity_iterations); },
                 [](C& c, const std::string& v) { c.csf.gravity_iterations = to_int("csf_iterations", v); }});
    k.push_back({"csf_threshold", "terrain classification distance in meters",
                 [](const C& c) { return num(c.csf.class_threshold); },
                 [](C& c, const std::string& v) { c.csf.class_threshold = to_double("csf_threshold", v); }});
    k.push_back({"csf_time_step", "cloth time step", [](const C& c) { return num(c.csf.time_step); },
                 [](C& c, const std::string& v) { c.csf.time_step = to_double("csf_time_step", v); }});

    k.push_back({"height_mode", "above-ground height: dtm, constant:H or lowest:H",
                 [](const C& c) { return c.height_mode.to_string(); },
                 [](C& c, const std::string& v) { c.height_mode = HeightMode::parse(v); }});
    k.push_back({"dtm_fallback", "height mode used when no terrain is near: none, constant:H or lowest:H",
                 [](const C& c) { return c.dtm_fallback ? c.dtm_fallback->to_string() : std::string("none"); },
                 [](C& c, const std::string& v) {
                   if (io::lower(v) == "none") {
                     c.dtm_fallback.reset();
                   } else {
                     c.dtm_fallback = HeightMode::parse(v);
                   }
                 }});
    real("terrain_window_m", "half-width of the terrain averaging window in meters", &C::terrain_window_m);
    real("min_height", "smallest above-ground height kept, meters", &C::min_height);

    k.push_back({"w_h", "horizontal distance weight", [](const C& c) { return num(c.segmentation.w_h); },
                 [](C& c, const std::string& v) { c.segmentation.w_h = to_double("w_h", v); }});
    k.push_back({"w_v", "vertical distance weight", [](const C& c) { return num(c.segmentation.w_v); },
                 [](C& c, const std::string& v) { c.segmentation.w_v = to_double("w_v", v); }});
    k.push_back({"w_c", "spectral distance weight", [](const C& c) { return num(c.segmentation.w_c); },
                 [](C& c, const std::string& v) { c.segmentation.w_c = to_double("w_c", v); }});
    k.push_back({"theta", "assignment cutoff (auto: w_h + 0.3 w_v + 0.5 w_c)",
                 [](const C& c) { return c.segmentation.theta ? num(*c.segmentation.theta) : std::string("auto"); },
                 [](C& c, const std::string& v) {
                   if (io::lower(v) == "auto") {
                     c.segmentation.theta.reset();
                   } else {
                     c.segmentation.theta = to_double("theta", v);
                   }
                 }});
    k.push_back({"norm_v", "vertical normalization in meters (auto: 95th percentile of treetop heights)",
                 [](const C& c) { return c.segmentation.norm_v ? num(*c.segmentation.norm_v) : std::string("auto"); },
                 [](C& c, const std::string& v) {
                   if (io::lower(v) == "auto") {
                     c.segmentation.norm_v.reset();
                   } else {
                     c.segmentation.norm_v = to_double("norm_v", v);
                   }
                 }});
    k.push_back({"search_factor", "assignment search radius as a multiple of crown diameter",
                 [](const C& c) { return num(c.segmentation.search_factor); },
                 [](C& c, const std::string& v) { c.segmentation.search_factor = to_double("search_factor", v); }});
    k.push_back({"neighborhood_radius", "size-coherence neighborhood radius in meters",
                 [](const C& c) { return num(c.postprocess.neighborhood_radius); },
                 [](C& c, const std::string& v) { c.postprocess.neighborhood_radius = to_double("neighborhood_radius", v); }});
    real("gamma", "smallest overlap ratio counted as a match", &C::gamma);
    k.push_back({"mode", "3d (surface model) or 2d (RED band only)",
                 [](const C& c) { return std::string(c.two_d ? "2d" : "3d"); },
                 [](C& c, const std::string& v) {
                   const std::string t = io::lower(v);
                   if (t != "2d" && t != "3d") throw ConfigError("mode must be 2d or 3d");
                   c.two_d = t == "2d";
                 }});
    real("two_d_height", "tree height assumed for crown size in 2d mode, meters", &C::two_d_height);
    text("out", "output directory", &C::out);
    return k;
  }();
  return keys;
}

inline const ConfigKey& find_config_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("unknown configuration key '" + name + "'");
}

inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  find_config_key(key).set(c, value);
}

// "key = value" lines; '#' starts a comment.
inline void apply_config_text(PipelineConfig& c, const std::string& text, const std::string& name = "config") {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      s = a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    try {
      set_config_value(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(PipelineConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str(), path.string());
}

inline std::string format_config(const PipelineConfig& c) {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << " = " << k.get(c) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Inputs.

struct PipelineInputs {
  Grid dsm;  // empty in 2d mode without a DSM file
  MultibandRaster raster;
  std::optional<std::vector<CrownRecord>> reference;
  std::optional<Scene> scene;  // set for synthetic inputs
};

// Checks that every referenced file exists before anything is loaded.
inline void check_input_files(const PipelineConfig& c) {
  for (const std::string* p : {&c.dsm, &c.bands, &c.reference}) {
    if (!p->empty() && !std::filesystem::is_regular_file(*p)) throw ConfigError("input file not found: " + *p);
  }
}

inline PipelineInputs load_inputs(const PipelineConfig& c) {
  c.validate();
  check_input_files(c);
  PipelineInputs in;
  if (c.scene) {
    Scene scene = generate_scene(*c.scene);
    in.dsm = scene.dsm;
    in.raster = scene.raster;
    in.reference = scene.truth_crowns;
    in.scene = std::move(scene);
  } else {
    in.raster = io::read_multiband(c.bands);
    if (!c.dsm.empty()) {
      in.dsm = io::read_ascii_grid(c.dsm);
      if (!(in.dsm.geometry() == in.raster.geometry())) throw InputError("DSM and bands differ in grid geometry");
    }
  }
  if (!c.reference.empty()) in.reference = read_crowns_geojson(c.reference, in.raster.geometry());
  return in;
}

// ---------------------------------------------------------------------------
// Pipeline.

struct StageCounts {
  std::size_t initial = 0;
  std::size_t height_check = 0;
  std::size_t nms = 0;
  std::size_t postprocessing = 0;
};

struct PipelineResult {
  Mask vegetation;
  std::optional<Mask> terrain;
  std::vector<TreetopCandidate> candidates;  // after NMS, before postprocessing
  std::vector<TreetopCandidate> tops;        // final
  LabelGrid labels;                          // final
  std::vector<CrownSegment> segments;        // final
  StageCounts counts;
  std::optional<MatchReport> report;
  double norm_v = 0.0;
};

namespace pipeline_detail {

// Runs one stage, prefixing any library error with the stage name.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NoTerrainError& e) {
    throw NoTerrainError(std::string(name) + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string(name) + ": " + e.what());
  } catch (const InternalError& e) {
    throw InternalError(std::string(name) + ": " + e.what());
  }
}

}  // namespace pipeline_detail

// The response floor is in DSM meters, so the 2d surface (reflectance) keeps
// the bare positivity test.
inline std::vector<TreetopCandidate> run_detector(const PipelineConfig& c, const Grid& surface, const Mask& veg) {
  switch (c.detector.kind) {
    case DetectorKind::Kind::Thr:
      return detect_thr(surface, veg, StructuringElement::disk(c.se_radius),
                        StructuringElement::disk(c.opening_se_radius), c.two_d ? 1e-6 : c.thr_min_response);
    case DetectorKind::Kind::FixedWindow: return detect_fixed_window(surface, veg, c.detector.size);
    case DetectorKind::Kind::SlopeBreak: return detect_slope_break(surface, veg, c.slope_break);
  }
  return {};
}

// Everything up to and including non-maximum suppression.
inline PipelineResult run_detection(const PipelineConfig& c, const PipelineInputs& in, std::ostream* log = nullptr) {
  using pipeline_detail::stage;
  c.validate();
  PipelineResult res;
  res.vegetation = stage("vegetation", [&] { return vegetation_mask(ndvi(in.raster), c.mu); });
  const GridGeometry& geo = in.raster.geometry();

  if (c.two_d) {
    if (log && !in.dsm.empty()) *log << "warning: 2d mode ignores the DSM\n";
    const Grid& red = stage("detection", [&]() -> const Grid& { return in.raster.band_for("RED"); });
    const auto initial = stage("detection", [&] { return run_detector(c, red, res.vegetation); });
    res.counts.initial = initial.size();
    const auto sized = stage("height check", [&] { return assign_constant_height(initial, c.two_d_height); });
    res.counts.height_check = sized.size();
    res.candidates = stage("non-maximum suppression", [&] { return non_max_suppress(sized, geo); });
    res.counts.nms = res.candidates.size();
    return res;
  }

  if (in.dsm.empty()) throw InputError("a DSM is required in 3d mode");
  if (c.height_mode.kind == HeightMode::Kind::Dtm)
    res.terrain = stage("terrain", [&] { return csf_classify(in.dsm, c.csf); });
  const Mask terrain = res.terrain ? *res.terrain : Mask(geo);

  const auto initial = stage("detection", [&] { return run_detector(c, in.dsm, res.vegetation); });
  res.counts.initial = initial.size();
  const auto checked = stage("height check", [&] {
    HeightResolver heights(in.dsm, terrain, meters_to_pixels(c.terrain_window_m, geo.cell_size), c.height_mode,
                           c.dtm_fallback);
    return height_filter(initial, heights, c.min_height);
  });
  res.counts.height_check = checked.size();
  res.candidates = stage("non-maximum suppression", [&] { return non_max_suppress(checked, geo); });
  res.counts.nms = res.candidates.size();
  return res;
}

// Delineation and postprocessing on top of detection results.
inline void run_delineation(const PipelineConfig& c, const PipelineInputs& in, PipelineResult& res) {
  using pipeline_detail::stage;
  SegmentationParams seg = c.segmentation;
  if (c.two_d) seg.w_v = 0.0;
  Delineation d = stage("delineation", [&] {
    DistanceContext ctx{c.two_d ? nullptr : &in.dsm, &in.raster, seg,
                        compute_norms(res.candidates, in.raster, res.vegetation, seg)};
    res.norm_v = ctx.norms.norm_v;
    return delineate(res.candidates, res.vegetation, ctx);
  });
  PostprocessResult post =
      stage("postprocessing", [&] { return postprocess(d.labels, d.segments, res.candidates, c.postprocess); });
  res.labels = std::move(d.labels);
  res.segments = std::move(post.segments);
  res.tops = std::move(post.tops);
  res.counts.postprocessing = res.tops.size();
}

inline std::vector<CrownRecord> predicted_crowns(const PipelineResult& res) {
  std::vector<CrownRecord> out;
  for (std::size_t k = 0; k < res.segments.size(); ++k)
    out.push_back({res.segments[k].id, res.segments[k].pixels, res.tops[k].dsm_height});
  return out;
}

inline PipelineResult run_pipeline(const PipelineConfig& c, const PipelineInputs& in, std::ostream* log = nullptr) {
  PipelineResult res = run_detection(c, in, log);
  run_delineation(c, in, res);
  if (in.reference) {
    res.report = pipeline_detail::stage("evaluation", [&] {
      return evaluate_crowns(*in.reference, predicted_crowns(res), in.raster.geometry(), c.gamma);
    });
  }
  return res;
}

// ---------------------------------------------------------------------------
// Comparison runs.

struct StageRow {
  std::string label;
  StageCounts counts;
};

struct BenchmarkResult {
  std::vector<MetricsRow> metrics;
  std::vector<StageRow> stages;
};

inline BenchmarkResult run_benchmark(const PipelineConfig& c, const PipelineInputs& in,
                                     const std::vector<DetectorKind>& detectors, std::ostream* log = nullptr) {
  if (detectors.empty()) throw InputError("benchmark needs at least one detector");
  if (!in.reference) throw InputError("benchmark needs reference crowns");
  BenchmarkResult out;
  for (const auto& d : detectors) {
    PipelineConfig cd = c;
    cd.detector = d;
    const PipelineResult r = run_pipeline(cd, in, log);
    out.metrics.push_back({d.label(), *r.report});
    out.stages.push_back({d.label(), r.counts});
  }
  return out;
}

inline std::string height_mode_label(const HeightMode& m) {
  switch (m.kind) {
    case HeightMode::Kind::Dtm: return "DTM";
    case HeightMode::Kind::Constant: return "C_" + io::format_double(m.value);
    case HeightMode::Kind::LowestPoint: return "L_" + io::format_double(m.value);
  }
  return "DTM";
}

inline BenchmarkResult run_height_modes(const PipelineConfig& c, const PipelineInputs& in,
                                        const std::vector<HeightMode>& modes, std::ostream* log = nullptr) {
  if (modes.empty()) throw InputError("height-mode comparison needs at least one mode");
  if (!in.reference) throw InputError("height-mode comparison needs reference crowns");
  BenchmarkResult out;
  for (const auto& m : modes) {
    PipelineConfig cm = c;
    cm.height_mode = m;
    const PipelineResult r = run_pipeline(cm, in, log);
    out.metrics.push_back({height_mode_label(m), *r.report});
    out.stages.push_back({height_mode_label(m), r.counts});
  }
  return out;
}

// S_3D and S_2D rows for the same inputs.
inline BenchmarkResult run_ablation_2d(const PipelineConfig& c, const PipelineInputs& in, std::ostream* log = nullptr) {
  if (!in.reference) throw InputError("2d ablation needs reference crowns");
  BenchmarkResult out;
  for (bool flat : {false, true}) {
    PipelineConfig cm = c;
    cm.two_d = flat;
    const PipelineResult r = run_pipeline(cm, in, log);
    const std::string label = flat ? "S_2D" : "S_3D";
    out.metrics.push_back({label, *r.report});
    out.stages.push_back({label, r.counts});
  }
  return out;
}

inline std::vector<DetectorKind> default_detectors() {
  return {DetectorKind::thr(),         DetectorKind::fixed_window(3),  DetectorKind::fixed_window(7),
          DetectorKind::fixed_window(11), DetectorKind::fixed_window(15), DetectorKind::fixed_window(19),
          DetectorKind::slope_break()};
}

// ---------------------------------------------------------------------------
// Artifacts.

inline std::string format_stage_counts_csv(const std::vector<StageRow>& rows) {
  std::ostringstream out;
  out << "label,Initial,Height Check,Non-Maximum Suppression,Post-Processing\n";
  for (const auto& r : rows)
    out << r.label << ',' << r.counts.initial << ',' << r.counts.height_check << ',' << r.counts.nms << ','
        << r.counts.postprocessing << '\n';
  return out.str();
}

inline void write_pipeline_artifacts(const PipelineConfig& c, const PipelineResult& res, const GridGeometry& geo,
                                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_text(dir / "treetops.csv", format_treetops_csv(res.tops, geo));
  io::write_ascii_grid(dir / "labels.asc", res.labels);
  io::write_text(dir / "crowns.json", format_crowns_geojson(predicted_crowns(res), geo));
  io::write_ascii_grid(dir / "vegetation.asc", res.vegetation);
  if (res.terrain) io::write_ascii_grid(dir / "terrain.asc", *res.terrain);
  const std::string label = c.two_d ? "S_2D" : c.detector.label();
  io::write_text(dir / "stage_counts.csv", format_stage_counts_csv({{label, res.counts}}));
  if (res.report) io::write_text(dir / "metrics.csv", format_metrics_csv({{label, *res.report}}));
  io::write_text(dir / "config.txt", format_config(c));
}

}  // namespace treecrown
