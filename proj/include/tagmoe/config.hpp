// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tagmoe/model.hpp"
#include "tagmoe/trainer.hpp"

namespace tagmoe {

/// Everything a CLI run needs. JSON layout (all keys optional, unknown keys
/// rejected):
///
///   { "seed": 0,
///     "model": { dim, blocks, moe_blocks, experts, top_k, ffn_hidden, gate_hidden,
///                head_hidden, matched_dense_blocks, matched_dense_hidden, point_dim,
///                cond_tokens, target_tokens, gate_noise, signature_source,
///                train_tag_embeddings },
///     "loss":  { lambda_lbl, lambda_align },
///     "train": { steps, batch_size, lr, beta1, beta2, adam_eps, eval_every, log_wall_time },
///     "data":  { samples_per_task, eval_samples_per_task, tasks, dataset, vocab, rules },
///     "analysis": { probe_train_fraction },
///     "output": { dir } }
struct RunConfig {
  std::uint64_t seed = 0;
  BackboneConfig model;
  TrainOptions train;
  std::size_t eval_every = 500;
  bool log_wall_time = true;
  std::size_t samples_per_task = 256;
  std::size_t eval_samples_per_task = 40;
  std::vector<std::string> tasks;  // empty: every registry task
  std::string dataset_path;        // empty: generate in memory
  std::string vocab_path;          // empty: built-in vocabulary
  std::string rules_path;          // empty: built-in rule table
  double probe_train_fraction = 0.5;
  std::string output_dir = "out";

  /// Propagates `seed` into the model and training RNG seeds and validates.
  void resolve();
  [[nodiscard]] nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  [[nodiscard]] std::uint64_t data_seed() const;
  [[nodiscard]] std::uint64_t eval_seed() const;
};

/// Dotted keys whose values differ between two resolved configs.
std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b);

}  // namespace tagmoe
