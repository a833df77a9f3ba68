// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tagmoe/commands.hpp"
#include "tagmoe/errors.hpp"
#include "tagmoe/moe.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

tagmoe::RunConfig resolve_config(const GlobalFlags& flags) {
  tagmoe::RunConfig config = flags.config.empty() ? tagmoe::RunConfig::from_json(nlohmann::json::object())
                                                  : tagmoe::RunConfig::load(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.out.empty()) config.output_dir = flags.out;
  config.resolve();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tagmoe: tag-aligned mixture-of-experts flow-matching toolkit"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Overrides the configured seed");
  app.add_option("--out", flags.out, "Overrides the output directory");

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic task mixture");
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint.bin and metrics.jsonl");

  auto* sample = app.add_subcommand("sample", "Integrate targets for held-out conditions of one task");
  std::string checkpoint;
  std::string task;
  std::size_t count = 8;
  std::size_t steps = 50;
  sample->add_option("--checkpoint", checkpoint)->required();
  sample->add_option("--task", task)->required();
  sample->add_option("-n,--count", count);
  sample->add_option("--steps", steps);

  auto* analyze = app.add_subcommand("analyze", "Write the routing report bundle");
  std::string dataset;
  analyze->add_option("--checkpoint", checkpoint)->required();
  analyze->add_option("--dataset", dataset, "Dataset file (default: held-out mixture)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full objective");
  auto* ablate = app.add_subcommand("ablate", "Train the dense, no-align and full arms and compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << tagmoe::format_error("usage", e.what()) << "\n";
    return tagmoe::kExitConfig;
  }

  try {
    const tagmoe::RunConfig config = resolve_config(flags);
    if (gen->parsed()) {
      std::cout << "dataset=" << tagmoe::cmd_gen_data(config).string() << "\n";
    } else if (train->parsed()) {
      const auto summary = tagmoe::cmd_train(config);
      std::cout << "steps=" << summary.steps << " initial_eval_loss=" << tagmoe::format_g17(summary.initial_eval_loss)
                << " final_eval_loss=" << tagmoe::format_g17(summary.final_eval_loss) << "\n";
    } else if (sample->parsed()) {
      const auto summary = tagmoe::cmd_sample(config, checkpoint, task, count, steps);
      std::cout << "points=" << summary.points.string()
                << " mean_squared_error=" << tagmoe::format_g17(summary.mean_squared_error) << "\n";
    } else if (analyze->parsed()) {
      for (const auto& [key, value] : tagmoe::cmd_analyze(config, checkpoint, dataset)) {
        std::cout << key << "=" << tagmoe::format_g17(value) << "\n";
      }
    } else if (gradcheck->parsed()) {
      const auto outcome = tagmoe::cmd_gradcheck(config);
      std::cout << "max_rel_error=" << tagmoe::format_g17(outcome.report.max_rel_error)
                << " region_stable=" << (outcome.report.region_stable ? "true" : "false")
                << " status=" << (outcome.passed ? "pass" : "fail") << "\n";
      if (!outcome.passed) {
        std::cerr << tagmoe::format_error("gradcheck", "relative error above tolerance or routing region moved") << "\n";
        return tagmoe::kExitGradcheck;
      }
    } else if (ablate->parsed()) {
      for (const auto& row : tagmoe::cmd_ablate(config)) {
        std::cout << row.arm;
        for (const auto& c : tagmoe::ablation_columns()) std::cout << " " << c << "=" << tagmoe::format_g17(row.metrics.at(c));
        std::cout << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << tagmoe::format_error(e) << "\n";
    return tagmoe::exit_code_for(e);
  }
  return tagmoe::kExitOk;
}
