// Copyright 2026 The treecrown Authors
// SPDX-License-Identifier: Apache-2.0

// Generates the canonical sparse scene, runs the default pipeline on it and
// prints the stage counts and accuracy row. Optional argument: output folder
// for the artifacts.

#include <iostream>

#include "treecrown/treecrown.hpp"

int main(int argc, char** argv) {
  using namespace treecrown;
  try {
    PipelineConfig config;
    config.scene = sparse_scene_spec();
    const PipelineInputs inputs = load_inputs(config);
    const PipelineResult result = run_pipeline(config, inputs);

    std::cout << format_stage_counts_csv({{"TH", result.counts}}) << '\n'
              << format_metrics_csv({{"TH", *result.report}});
    if (argc > 1) write_pipeline_artifacts(config, result, inputs.raster.geometry(), argv[1]);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
