// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

#include <json.hpp>

#include "tagmoe/analysis.hpp"
#include "tagmoe/binary_io.hpp"
#include "tagmoe/checkpoint.hpp"
#include "tagmoe/errors.hpp"
#include "tagmoe/rng.hpp"
#include "tagmoe/trainer.hpp"

namespace tagmoe {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file(path.string(), text);
}

void write_config(const RunConfig& config, const fs::path& dir) {
  write_text(dir / "config.json", config.to_json().dump(2) + "\n");
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void check_shape(const DataShape& got, const DataShape& want, const fs::path& path) {
  if (got.cond_tokens != want.cond_tokens || got.target_tokens != want.target_tokens ||
      got.point_dim != want.point_dim) {
    throw ConfigError("dataset '" + path.string() + "' token layout does not match the model config");
  }
}

std::string escape(std::string_view text) {
  std::string out;
  for (const char c : text) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

struct TrainedRun {
  Model model;
  TrainSummary summary;
};

TrainedRun run_training(const RunConfig& config, const Workspace& ws, const std::vector<TrainingSample>& train,
                        const std::vector<TrainingSample>& eval, const fs::path& dir) {
  fs::create_directories(dir);
  write_config(config, dir);
  TrainedRun run{Model(config.model, ws.vocab.size()), {}};
  auto metrics = open_output(dir / "metrics.jsonl");
  auto eval_log = open_output(dir / "eval.jsonl");
  run.summary = train_model(run.model, config, train, eval, &metrics, &eval_log);
  save_checkpoint(dir / "checkpoint.bin", run.model.parameters());
  return run;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    const std::string kind = err->kind();
    if (kind == "config" || kind == "vocabulary" || kind == "registry") return kExitConfig;
    if (kind == "io" || kind == "load") return kExitIo;
    if (kind == "numeric") return kExitNumeric;
  }
  return kExitInternal;
}

std::string format_error(const std::exception& e) {
  std::string kind = "internal";
  if (const auto* err = dynamic_cast<const Error*>(&e)) kind = err->kind();
  return format_error(kind, e.what());
}

std::string format_error(std::string_view kind, std::string_view message) {
  return "error: class=" + std::string(kind) + " message=\"" + escape(message) + "\"";
}

Workspace make_workspace(const RunConfig& config) {
  Workspace ws;
  ws.vocab = config.vocab_path.empty() ? TagVocabulary::builtin() : TagVocabulary::load(config.vocab_path);
  ws.rules = config.rules_path.empty() ? TagRules::builtin(ws.vocab) : TagRules::load(config.rules_path, ws.vocab);
  const auto all = default_task_registry();
  if (config.tasks.empty()) {
    ws.registry = all;
  } else {
    for (const auto& id : config.tasks) ws.registry.push_back(find_task(all, id));
  }
  for (const auto& task : ws.registry) (void)annotate_synthetic(task.id, ws.rules);
  return ws;
}

std::vector<TrainingSample> training_samples(const RunConfig& config, const Workspace& ws) {
  const DataShape shape = config.model.data_shape();
  if (!config.dataset_path.empty()) {
    if (!fs::exists(config.dataset_path)) throw IoError("dataset '" + config.dataset_path + "' does not exist");
    DataShape stored;
    auto samples = load_dataset(config.dataset_path, ws.rules, &stored);
    check_shape(stored, shape, config.dataset_path);
    return samples;
  }
  return generate_mixed(ws.registry, config.samples_per_task, config.data_seed(), shape, ws.rules);
}

std::vector<TrainingSample> evaluation_samples(const RunConfig& config, const Workspace& ws) {
  return generate_mixed(ws.registry, config.eval_samples_per_task, config.eval_seed(), config.model.data_shape(),
                        ws.rules);
}

TrainSummary train_model(Model& model, const RunConfig& config, const std::vector<TrainingSample>& train,
                         const std::vector<TrainingSample>& eval, std::ostream* metrics, std::ostream* eval_log) {
  TrainSummary summary;
  if (config.train.steps == 0) return summary;
  if (train.empty()) throw ContractError("training set is empty");

  const auto log_eval = [&](std::size_t step) {
    const double loss = evaluate_flow_loss(model, eval, config.eval_seed());
    if (eval_log != nullptr) {
      nlohmann::ordered_json line;
      line["step"] = step;
      line["eval_flow_loss"] = loss;
      *eval_log << line.dump() << '\n';
    }
    return loss;
  };

  Trainer trainer(model, train, config.train);
  summary.initial_eval_loss = log_eval(0);
  summary.final_eval_loss = summary.initial_eval_loss;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t step = 1; step <= config.train.steps; ++step) {
    summary.last = trainer.train_step();
    summary.steps = step;
    if (metrics != nullptr) {
      nlohmann::ordered_json line;
      line["step"] = step;
      line["l_flow"] = summary.last.flow;
      line["l_lbl"] = summary.last.lbl;
      line["l_align"] = summary.last.align;
      line["l_total"] = summary.last.total;
      if (config.log_wall_time) {
        const auto elapsed = std::chrono::steady_clock::now() - start;
        line["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
      }
      *metrics << line.dump() << '\n';
    }
    const bool periodic = config.eval_every > 0 && step % config.eval_every == 0;
    if (periodic || step == config.train.steps) summary.final_eval_loss = log_eval(step);
  }
  return summary;
}

Model load_model(const RunConfig& config, const Workspace& ws, const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint.string() + "' does not exist");
  Model model(config.model, ws.vocab.size());
  ParameterList params = model.parameters();
  assign_parameters(params, load_checkpoint(checkpoint));
  return model;
}

fs::path cmd_gen_data(const RunConfig& config) {
  RunConfig generated = config;
  generated.dataset_path.clear();
  const Workspace ws = make_workspace(config);
  const auto samples = training_samples(generated, ws);
  const fs::path out =
      config.dataset_path.empty() ? fs::path(config.output_dir) / "dataset.bin" : fs::path(config.dataset_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_dataset(samples, config.model.data_shape(), out);
  fs::create_directories(config.output_dir);
  write_config(config, config.output_dir);
  return out;
}

TrainSummary train_into(const RunConfig& config, const fs::path& dir) {
  const Workspace ws = make_workspace(config);
  const auto train = training_samples(config, ws);
  const auto eval = evaluation_samples(config, ws);
  return run_training(config, ws, train, eval, dir).summary;
}

TrainSummary cmd_train(const RunConfig& config) { return train_into(config, config.output_dir); }

SampleSummary cmd_sample(const RunConfig& config, const fs::path& checkpoint, const std::string& task,
                         std::size_t n, std::size_t steps) {
  if (n == 0) throw ConfigError("sample count must be positive");
  if (steps == 0) throw ConfigError("integration steps must be positive");
  const Workspace ws = make_workspace(config);
  const TaskSpec& spec = find_task(default_task_registry(), task);
  const Model model = load_model(config, ws, checkpoint);
  const auto samples = generate(spec, n, config.eval_seed(), config.model.data_shape(), ws.rules);

  std::string csv = "sample,role,index,x,y\n";
  const auto rows = [&](std::size_t i, const char* role, const Tensor& points) {
    for (std::size_t p = 0; p < points.dim(0); ++p) {
      csv += std::to_string(i) + "," + role + "," + std::to_string(p) + "," + format_g17(points.at(p, 0)) + "," +
             format_g17(points.at(p, 1)) + "\n";
    }
  };
  SampleSummary summary;
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor generated =
        sample_euler(model, samples[i].condition, steps, derive_seed(config.seed, "sample-noise", i));
    rows(i, "condition", samples[i].condition);
    rows(i, "generated", generated);
    rows(i, "reference", samples[i].target);
    const auto g = generated.data();
    const auto r = samples[i].target.data();
    for (std::size_t j = 0; j < g.size(); ++j) sq += (g[j] - r[j]) * (g[j] - r[j]);
    count += g.size();
  }
  summary.mean_squared_error = sq / static_cast<double>(count);
  summary.points = fs::path(config.output_dir) / ("samples_" + task + ".csv");
  write_text(summary.points, csv);
  return summary;
}

std::map<std::string, double> cmd_analyze(const RunConfig& config, const fs::path& checkpoint,
                                          const fs::path& dataset) {
  const Workspace ws = make_workspace(config);
  const Model model = load_model(config, ws, checkpoint);
  std::vector<TrainingSample> samples;
  if (dataset.empty()) {
    samples = evaluation_samples(config, ws);
  } else {
    if (!fs::exists(dataset)) throw IoError("dataset '" + dataset.string() + "' does not exist");
    DataShape stored;
    samples = load_dataset(dataset, ws.rules, &stored);
    check_shape(stored, config.model.data_shape(), dataset);
  }
  return write_report_bundle(model, samples, ws.vocab, fs::path(config.output_dir) / "report", config.eval_seed(),
                             config.probe_train_fraction);
}

GradcheckOutcome cmd_gradcheck(const RunConfig& config) {
  const Workspace ws = make_workspace(config);
  Model model(config.model, ws.vocab.size());
  Rng rng(derive_seed(config.seed, "gradcheck", 0));
  std::normal_distribution<double> jitter(0.0, kGradcheckInitStd);
  for (auto& p : model.trainable_parameters()) {
    for (double& v : p.tensor.mutable_data()) v += jitter(rng);
  }
  const auto sample = generate(ws.registry.front(), 1, config.data_seed(), config.model.data_shape(), ws.rules).front();
  const FlowState state = eval_flow_state(sample, config.eval_seed(), 0);
  const auto probe = [&] {
    auto result = model.total_loss(sample, state);
    return GradProbe{result.total, result.record.routing_key()};
  };

  GradcheckOutcome outcome;
  outcome.report = check_gradients(probe, model.trainable_parameters());
  outcome.passed = outcome.report.region_stable && outcome.report.max_rel_error < kGradcheckTolerance;

  std::string text;
  for (const auto& e : outcome.report.entries) {
    text += e.name + " elements=" + std::to_string(e.elements) + " rel_error=" + format_g17(e.rel_error) +
            " max_abs_error=" + format_g17(e.max_abs_error) + "\n";
  }
  text += "max_rel_error=" + format_g17(outcome.report.max_rel_error) + "\n";
  text += "tolerance=" + format_g17(kGradcheckTolerance) + "\n";
  text += std::string("region_stable=") + (outcome.report.region_stable ? "true" : "false") + "\n";
  text += std::string("status=") + (outcome.passed ? "pass" : "fail") + "\n";
  write_text(fs::path(config.output_dir) / "gradcheck.txt", text);
  return outcome;
}

const std::vector<std::string>& ablation_keys() {
  static const std::vector<std::string> keys = {"loss.lambda_align", "model.matched_dense_blocks",
                                                "model.matched_dense_hidden", "model.moe_blocks"};
  return keys;
}

std::vector<AblationArm> ablation_arms(const RunConfig& config) {
  if (config.model.moe_blocks == 0) throw ConfigError("ablation needs a config with moe_blocks > 0");
  if (config.model.matched_dense_blocks != 0) {
    throw ConfigError("ablation base config must not already widen dense blocks");
  }
  AblationArm dense{"dense", config};
  dense.config.model.moe_blocks = 0;
  dense.config.model.matched_dense_blocks = config.model.moe_blocks;
  dense.config.model.matched_dense_hidden = matched_dense_hidden(config.model);
  dense.config.resolve();

  AblationArm no_align{"moe-no-align", config};
  no_align.config.model.lambda_align = 0.0;
  no_align.config.resolve();

  return {dense, no_align, {"moe-align", config}};
}

std::vector<std::string> ablation_columns() {
  return {"eval_flow_loss",     "probe_macro_accuracy", "separation_margin", "silhouette",
          "utilization_cv_mean", "parameter_count",     "activated_ffn_macs", "final_l_flow"};
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config) {
  const auto arms = ablation_arms(config);
  const auto& allowed = ablation_keys();
  std::string diff_csv = "arm,key,base,arm_value\n";
  const auto base_json = config.to_json();
  for (const auto& arm : arms) {
    for (const auto& key : config_diff(config, arm.config)) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ContractError("ablation arm '" + arm.name + "' changes '" + key + "'");
      }
      const auto ptr = nlohmann::json::json_pointer("/" + std::string(key).replace(key.find('.'), 1, "/"));
      diff_csv += arm.name + "," + key + "," + base_json.at(ptr).dump() + "," + arm.config.to_json().at(ptr).dump() +
                  "\n";
    }
  }

  const Workspace ws = make_workspace(config);
  const auto train = training_samples(config, ws);
  const auto eval = evaluation_samples(config, ws);
  const fs::path out(config.output_dir);

  std::vector<AblationRow> rows;
  for (const auto& arm : arms) {
    const fs::path dir = out / arm.name;
    auto run = run_training(arm.config, ws, train, eval, dir);
    const auto report = write_report_bundle(run.model, eval, ws.vocab, dir / "report", arm.config.eval_seed(),
                                            arm.config.probe_train_fraction);
    AblationRow row{arm.name, {}};
    const auto get = [&](const std::string& key) {
      const auto it = report.find(key);
      return it == report.end() ? kNaN : it->second;
    };
    row.metrics["eval_flow_loss"] = get("eval_flow_loss");
    row.metrics["probe_macro_accuracy"] = get("probe_macro_accuracy");
    row.metrics["separation_margin"] = get("separation_margin");
    row.metrics["silhouette"] = get("silhouette");
    double cv = 0.0;
    for (std::size_t l = 0; l < arm.config.model.moe_blocks; ++l) cv += get("utilization_cv_layer" + std::to_string(l));
    row.metrics["utilization_cv_mean"] =
        arm.config.model.moe_blocks == 0 ? kNaN : cv / static_cast<double>(arm.config.model.moe_blocks);
    row.metrics["parameter_count"] = static_cast<double>(run.model.parameter_count());
    row.metrics["activated_ffn_macs"] = static_cast<double>(activated_ffn_macs_per_token(arm.config.model));
    row.metrics["final_l_flow"] = run.summary.steps == 0 ? kNaN : run.summary.last.flow;
    rows.push_back(std::move(row));
  }

  std::string csv = "arm";
  for (const auto& c : ablation_columns()) csv += "," + c;
  csv += '\n';
  for (const auto& row : rows) {
    csv += row.arm;
    for (const auto& c : ablation_columns()) csv += "," + format_g17(row.metrics.at(c));
    csv += '\n';
  }
  write_text(out / "ablation.csv", csv);
  write_text(out / "ablation_diff.csv", diff_csv);
  write_config(config, out);
  return rows;
}

}  // namespace tagmoe
