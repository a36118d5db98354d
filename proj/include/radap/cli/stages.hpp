#pragma once

#include "radap/cli/config.hpp"

namespace radap::cli {

enum class Stage { mask, train_fr, gen_fpatch, train_segmenter, attack, defend, evaluate, plot };

Stage stage_from_name(const std::string& name);

struct StageOverrides {
  std::string image_path;     // attack / defend input image
  std::string out_path;       // output override
  std::string segmenter_path; // checkpoint overrides
  std::string fr_path;
  int threads = 0;
};

// Executes exactly one stage: reads upstream artifacts from the artifact
// directory, writes this stage's outputs plus a manifest (config snapshot and
// input fingerprints). Throws DependencyError with a remediation hint when an
// upstream artifact is missing.
void run_stage(Stage stage, const RunConfig& config, const StageOverrides& overrides = {});

// Exit-code mapping: 0 success, 2 validation, 3 dependency, 4 runtime.
int exit_code_for(const std::exception& e);

}  // namespace radap::cli
