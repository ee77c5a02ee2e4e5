// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Every configuration key is also a flag; flags
// override values read from --config.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treecrown/treecrown.hpp"

namespace {

using namespace treecrown;

struct Common {
  std::string config_file;
  bool print_config = false;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_file, "key = value configuration file");
  cmd->add_flag("--print-config", common.print_config, "print the effective configuration and exit");
  for (const auto& key : config_keys()) {
    std::string names = "--" + key.name;
    std::string dashed = key.name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key.name) names += ",--" + dashed;
    const std::string name = key.name;
    cmd->add_option_function<std::string>(
           names, [&common, name](const std::string& v) { common.overrides[name] = v; }, key.help)
        ->type_name("VALUE");
  }
}

PipelineConfig build_config(const Common& common) {
  PipelineConfig c;
  if (!common.config_file.empty()) apply_config_file(c, common.config_file);
  // Scene density first, so later scene_* keys refine the chosen archetype.
  // A scene already described by the config file only changes density.
  if (auto it = common.overrides.find("scene"); it != common.overrides.end()) {
    const std::string v = io::lower(it->second);
    if (c.scene) {
      set_config_value(c, "scene", v);
    } else if (v == "dense") {
      c.scene = dense_scene_spec();
    } else if (v == "urban") {
      c.scene = urban_scene_spec();
    } else if (v == "sparse") {
      c.scene = sparse_scene_spec();
    } else {
      set_config_value(c, "scene", v);
    }
  }
  for (const auto& [k, v] : common.overrides)
    if (k != "scene") set_config_value(c, k, v);
  return c;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  return out;
}

int cmd_synth(const PipelineConfig& c) {
  if (!c.scene) throw ConfigError("synth needs --scene sparse|dense|urban");
  c.scene->validate();
  const Scene scene = generate_scene(*c.scene);
  write_scene(scene, c.out);
  std::cout << "wrote " << scene.trees.size() << " trees to " << c.out << '\n';
  return 0;
}

int cmd_detect(const PipelineConfig& c) {
  const PipelineInputs in = load_inputs(c);
  PipelineResult res = run_detection(c, in, &std::cerr);
  const std::filesystem::path dir = c.out;
  std::filesystem::create_directories(dir);
  io::write_text(dir / "treetops.csv", format_treetops_csv(res.candidates, in.raster.geometry()));
  io::write_ascii_grid(dir / "vegetation.asc", res.vegetation);
  if (res.terrain) io::write_ascii_grid(dir / "terrain.asc", *res.terrain);
  StageCounts counts = res.counts;
  counts.postprocessing = counts.nms;
  io::write_text(dir / "stage_counts.csv", format_stage_counts_csv({{c.detector.label(), counts}}));
  std::cout << res.candidates.size() << " treetops\n";
  return 0;
}

int cmd_delineate(const PipelineConfig& c, const std::string& treetops_path) {
  if (treetops_path.empty()) throw ConfigError("delineate needs --treetops");
  if (!std::filesystem::is_regular_file(treetops_path)) throw ConfigError("input file not found: " + treetops_path);
  const PipelineInputs in = load_inputs(c);
  PipelineResult res;
  res.vegetation = vegetation_mask(ndvi(in.raster), c.mu);
  res.candidates = parse_treetops_csv(io::read_text(treetops_path), treetops_path);
  for (const auto& t : res.candidates) {
    if (!in.raster.geometry().contains(t.pixel)) throw InputError(treetops_path + ": treetop outside the grid");
    if (!(t.crown_diameter > 0.0)) throw InputError(treetops_path + ": every treetop needs a crown_diameter");
  }
  res.counts.initial = res.counts.height_check = res.counts.nms = res.candidates.size();
  run_delineation(c, in, res);
  write_pipeline_artifacts(c, res, in.raster.geometry(), c.out);
  std::cout << res.segments.size() << " crowns\n";
  return 0;
}

int cmd_evaluate(const PipelineConfig& c, const std::string& predicted, const std::string& grid_path) {
  if (c.reference.empty() || predicted.empty() || grid_path.empty())
    throw ConfigError("evaluate needs --reference, --predicted and --grid");
  for (const std::string& p : {c.reference, predicted, grid_path})
    if (!std::filesystem::is_regular_file(p)) throw ConfigError("input file not found: " + p);
  const GridGeometry geo = io::read_ascii_grid(grid_path).geometry();
  const auto refs = read_crowns_geojson(c.reference, geo);
  const auto preds = read_crowns_geojson(predicted, geo);
  const MatchReport m = evaluate_crowns(refs, preds, geo, c.gamma);
  const std::string csv = format_metrics_csv({{"eval", m}});
  std::filesystem::create_directories(c.out);
  io::write_text(std::filesystem::path(c.out) / "metrics.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_pipeline(const PipelineConfig& c) {
  const PipelineInputs in = load_inputs(c);
  const PipelineResult res = run_pipeline(c, in, &std::cerr);
  write_pipeline_artifacts(c, res, in.raster.geometry(), c.out);
  std::cout << format_stage_counts_csv({{c.two_d ? "S_2D" : c.detector.label(), res.counts}});
  if (res.report) std::cout << format_metrics_csv({{c.two_d ? "S_2D" : c.detector.label(), *res.report}});
  return 0;
}

int cmd_benchmark(const PipelineConfig& c, const std::string& detectors, const std::string& modes, bool ablation) {
  std::vector<DetectorKind> kinds;
  if (detectors == "all") {
    kinds = default_detectors();
  } else {
    for (const auto& d : split_list(detectors)) kinds.push_back(DetectorKind::parse(d));
  }
  std::vector<HeightMode> hm;
  for (const auto& m : split_list(modes)) hm.push_back(HeightMode::parse(m));
  if (kinds.empty() && hm.empty() && !ablation) throw InputError("benchmark needs at least one detector");

  const PipelineInputs in = load_inputs(c);
  if (!in.reference) throw InputError("benchmark needs reference crowns (--reference or --scene)");
  BenchmarkResult all;
  auto append = [&all](const BenchmarkResult& r) {
    all.metrics.insert(all.metrics.end(), r.metrics.begin(), r.metrics.end());
    all.stages.insert(all.stages.end(), r.stages.begin(), r.stages.end());
  };
  if (!kinds.empty()) append(run_benchmark(c, in, kinds, &std::cerr));
  if (!hm.empty()) append(run_height_modes(c, in, hm, &std::cerr));
  if (ablation) append(run_ablation_2d(c, in, &std::cerr));

  const std::filesystem::path dir = c.out;
  std::filesystem::create_directories(dir);
  io::write_text(dir / "benchmark.csv", format_metrics_csv(all.metrics));
  io::write_text(dir / "stage_counts.csv", format_stage_counts_csv(all.stages));
  io::write_text(dir / "config.txt", format_config(c));
  std::cout << format_metrics_csv(all.metrics) << '\n' << format_stage_counts_csv(all.stages);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treetop detection and crown delineation from a DSM and multispectral bands"};
  app.require_subcommand(1);

  Common common;
  std::string treetops, predicted, grid, detectors = "all", modes;
  bool ablation = false;

  auto* synth = app.add_subcommand("synth", "write a synthetic scene with ground truth");
  auto* detect = app.add_subcommand("detect", "vegetation, terrain, treetop detection, height check, NMS");
  auto* delin = app.add_subcommand("delineate", "delineate crowns from a treetop CSV");
  delin->add_option("--treetops", treetops, "treetop CSV written by detect");
  auto* evaluate = app.add_subcommand("evaluate", "match predicted crowns against reference crowns");
  evaluate->add_option("--predicted", predicted, "predicted crown GeoJSON");
  evaluate->add_option("--grid", grid, "ASCII grid defining the raster geometry");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage and write all artifacts");
  auto* bench = app.add_subcommand("benchmark", "compare detectors, height modes and the 2d ablation");
  bench->add_option("--detectors", detectors, "comma list (thr, fixed:N, sb), 'all' or empty")->capture_default_str();
  bench->add_option("--height-modes", modes, "comma list of height modes, e.g. dtm,constant:10,lowest:13");
  bench->add_flag("--ablation-2d", ablation, "append S_3D and S_2D rows");

  for (auto* cmd : {synth, detect, delin, evaluate, pipeline, bench}) add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const PipelineConfig c = build_config(common);
    if (common.print_config) {
      std::cout << format_config(c);
      return 0;
    }
    if (synth->parsed()) return cmd_synth(c);
    if (detect->parsed()) return cmd_detect(c);
    if (delin->parsed()) return cmd_delineate(c, treetops);
    if (evaluate->parsed()) return cmd_evaluate(c, predicted, grid);
    if (pipeline->parsed()) return cmd_pipeline(c);
    if (bench->parsed()) return cmd_benchmark(c, detectors, modes, ablation);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
