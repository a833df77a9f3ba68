// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tagmoe/config.hpp"
#include "tagmoe/data.hpp"
#include "tagmoe/gradcheck.hpp"
#include "tagmoe/model.hpp"
#include "tagmoe/semantics.hpp"

namespace tagmoe {

// Process exit codes, one per error class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitGradcheck = 5;

int exit_code_for(const std::exception& e);
/// `error: class=<kind> message="<escaped what()>"`.
std::string format_error(const std::exception& e);
std::string format_error(std::string_view kind, std::string_view message);

/// Vocabulary, rule table and the selected task registry for a run.
struct Workspace {
  TagVocabulary vocab;
  TagRules rules;
  std::vector<TaskSpec> registry;
};

Workspace make_workspace(const RunConfig& config);
/// The configured dataset file, or a freshly generated mixture.
std::vector<TrainingSample> training_samples(const RunConfig& config, const Workspace& ws);
/// Held-out mixture drawn from an independent seed.
std::vector<TrainingSample> evaluation_samples(const RunConfig& config, const Workspace& ws);

struct TrainSummary {
  std::size_t steps = 0;
  double initial_eval_loss = 0.0;
  double final_eval_loss = 0.0;
  LossBreakdown last;
};

/// Runs `config.train.steps` optimizer steps on `model`. One JSON line per
/// step goes to `metrics`; evaluation losses (step 0, every eval_every steps
/// and the last step) go to `eval_log`. Either stream may be null. Nothing is
/// evaluated when steps is 0.
TrainSummary train_model(Model& model, const RunConfig& config, const std::vector<TrainingSample>& train,
                         const std::vector<TrainingSample>& eval, std::ostream* metrics, std::ostream* eval_log);

Model load_model(const RunConfig& config, const Workspace& ws, const std::filesystem::path& checkpoint);

/// Writes dataset.bin (or data.dataset when set) and config.json.
std::filesystem::path cmd_gen_data(const RunConfig& config);

/// Writes config.json, metrics.jsonl, eval.jsonl and checkpoint.bin into `dir`.
TrainSummary train_into(const RunConfig& config, const std::filesystem::path& dir);
TrainSummary cmd_train(const RunConfig& config);

struct SampleSummary {
  std::filesystem::path points;
  /// Mean squared distance between generated and reference targets.
  double mean_squared_error = 0.0;
};

/// Integrates `n` targets for held-out conditions of `task`. Points file:
/// sample,role,index,x,y with role in {condition, generated, reference}.
SampleSummary cmd_sample(const RunConfig& config, const std::filesystem::path& checkpoint, const std::string& task,
                         std::size_t n, std::size_t steps);

/// Report bundle under <out>/report. An empty dataset path selects the
/// held-out evaluation mixture.
std::map<std::string, double> cmd_analyze(const RunConfig& config, const std::filesystem::path& checkpoint,
                                          const std::filesystem::path& dataset);

inline constexpr double kGradcheckTolerance = 1e-4;
inline constexpr double kGradcheckInitStd = 0.3;

struct GradcheckOutcome {
  GradCheckReport report;
  bool passed = false;
};

/// Finite-difference check of the full objective over every trainable tensor,
/// on one sample with parameters redrawn at a larger scale. Writes
/// gradcheck.txt.
GradcheckOutcome cmd_gradcheck(const RunConfig& config);

struct AblationArm {
  std::string name;
  RunConfig config;
};

/// dense (MoE slots replaced by width-matched dense FFNs), moe-no-align
/// (lambda_align = 0) and moe-align (the config as given).
std::vector<AblationArm> ablation_arms(const RunConfig& config);
/// Keys an arm may change relative to the full configuration.
const std::vector<std::string>& ablation_keys();

struct AblationRow {
  std::string arm;
  std::map<std::string, double> metrics;
};

/// Trains every arm into <out>/<arm>, writes ablation.csv and
/// ablation_diff.csv.
std::vector<AblationRow> cmd_ablate(const RunConfig& config);

std::vector<std::string> ablation_columns();

}  // namespace tagmoe
