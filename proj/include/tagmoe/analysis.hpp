// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tagmoe/model.hpp"
#include "tagmoe/moe.hpp"
#include "tagmoe/semantics.hpp"

namespace tagmoe {

/// Share of tokens whose top-1 expert is i, per MoE layer ([L][N]).
struct UtilizationReport {
  std::vector<std::vector<double>> layers;
};

/// Hard top-1 counts over all records, normalized per layer. With
/// `token_subset`, only those token positions are counted.
UtilizationReport expert_utilization(std::span<const RoutingRecord> records,
                                     std::span<const std::size_t> token_subset = {});

/// Population standard deviation over mean; 0 for a zero mean.
double coefficient_of_variation(std::span<const double> values);

/// Routing scores of one expert laid out as the token sequence:
/// row 0 condition tokens, row 1 noisy-target tokens, row 2 the timestep token.
struct Heatmap {
  std::vector<std::vector<double>> rows;
};

Heatmap token_heatmap(const RoutingRecord& record, std::size_t layer, std::size_t expert,
                      std::size_t cond_tokens, std::size_t target_tokens);
/// Score in [0, 1] to a byte: round-half-up of 255 * score.
std::uint8_t quantize_score(double score);
std::string heatmap_csv(const Heatmap& map);
/// Binary PGM (P5); ragged rows are padded with 0.
std::string heatmap_pgm(const Heatmap& map);

struct SignatureRow {
  std::string task_id;
  TagSet tags;
  std::vector<double> signature;
};
using SignatureTable = std::vector<SignatureRow>;

struct SeparationMetrics {
  double within_cosine = 0.0;
  double between_cosine = 0.0;
  /// within_cosine - between_cosine.
  double margin = 0.0;
  /// Mean Euclidean silhouette with task ids as labels.
  double silhouette = 0.0;
};

/// Needs at least two tasks with at least two rows each.
SeparationMetrics signature_separation(const SignatureTable& table);

struct ProbeResult {
  std::vector<double> accuracy;   // per tag, held-out
  std::vector<bool> degenerate;   // label constant over the whole table
  double macro_accuracy = 0.0;    // over non-degenerate tags
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

/// Per-tag closed-form ridge regression from [g, 1] to {0, 1}, thresholded
/// at 0.5. The split is stratified by task and seeded.
ProbeResult tag_probe(const SignatureTable& table, std::size_t tag_count, double train_fraction,
                      std::uint64_t seed, double ridge = 1e-6);

/// Mean pairwise |cos| between rows of W_tag.
double collapse_monitor(const Tensor& tag_embedding);

/// Frozen-weight routing of an evaluation set.
struct RoutingCollection {
  SignatureTable table;
  std::vector<RoutingRecord> records;
};

/// One forward pass per sample with (t, z1) from eval_flow_state(sample, seed, i).
RoutingCollection collect_routing(const Model& model, const std::vector<TrainingSample>& samples,
                                  std::uint64_t seed);

/// Writes the analysis bundle into `dir` and returns the summary metrics.
///   utilization.csv, utilization_target.csv, utilization_by_task.csv,
///   signatures.csv, heatmaps/<task>_layer<l>_expert<e>.{csv,pgm},
///   metrics.txt (key=value)
std::map<std::string, double> write_report_bundle(const Model& model, const std::vector<TrainingSample>& samples,
                                                  const TagVocabulary& vocab, const std::filesystem::path& dir,
                                                  std::uint64_t seed, double train_fraction = 0.5);

}  // namespace tagmoe
