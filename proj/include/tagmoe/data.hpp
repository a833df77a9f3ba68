// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tagmoe/semantics.hpp"
#include "tagmoe/tensor.hpp"

// Synthetic multi-task point-cloud edits.
//
// Each sample has `points` source points in the plane. The condition holds
// an instruction marker (row 0, a jittered task-specific anchor standing in
// for the edit instruction) followed by the source points, so
// cond_tokens = points + 1. The target z0 holds the edited points, row i
// corresponding to source point i (condition row i + 1).

namespace tagmoe {

enum class TaskKind {
  kShiftLocal,    // marked points move right
  kUnshiftLocal,  // inverse of kShiftLocal
  kRecolorLocal,  // marked points contract toward their centroid
  kRotate,        // every point rotates by 90 degrees
  kScale,         // every point scales by 1.5
  kRestyleRing,   // every point is projected onto the unit circle
  kRestyleGrid,   // every point snaps to a 0.5 grid
};

struct TaskSpec {
  std::string id;
  std::string family;
  TaskKind kind;
  double anchor_x = 0.0;
  double anchor_y = 0.0;
  /// Source-point indices edited by local tasks; empty for global ones.
  std::vector<std::size_t> marked;
};

struct DataShape {
  std::size_t cond_tokens = 7;
  std::size_t target_tokens = 6;
  std::size_t point_dim = 2;

  /// Throws ConfigError unless point_dim == 2 and cond_tokens == target_tokens + 1.
  void validate() const;
};

struct TrainingSample {
  Tensor condition;  // [cond_tokens x point_dim]
  Tensor target;     // [target_tokens x point_dim]
  TagSet tags;
  std::string task_id;
};

inline constexpr double kShiftDistance = 0.8;
inline constexpr double kEditNoise = 0.02;
inline constexpr double kMarkerJitter = 0.05;
inline constexpr double kAnchorRadius = 2.5;

/// Seven tasks in three families (local edit, global geometry, re-render).
std::vector<TaskSpec> default_task_registry();
const TaskSpec& find_task(const std::vector<TaskSpec>& registry, const std::string& id);

/// Applies the task's deterministic edit to source points [n x 2] (no noise).
std::vector<double> apply_task_map(const TaskSpec& spec, const std::vector<double>& source);

/// n samples with per-sample seeds derived from (seed, task id, index).
std::vector<TrainingSample> generate(const TaskSpec& spec, std::size_t n, std::uint64_t seed,
                                     const DataShape& shape, const TagRules& rules);
/// `per_task` samples of every registry task, grouped by task in registry order.
std::vector<TrainingSample> generate_mixed(const std::vector<TaskSpec>& registry, std::size_t per_task,
                                           std::uint64_t seed, const DataShape& shape, const TagRules& rules);

// Dataset file: "TAGDS1", u32 version, u64 sample count, u32 cond_tokens,
// u32 target_tokens, u32 point_dim, u32 task count, task ids (u16 length +
// bytes); then per sample: u16 task index, u16 tag count, u16 tag ids,
// f64 condition values, f64 target values. Little-endian throughout.
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_dataset(const std::vector<TrainingSample>& samples, const DataShape& shape);
/// Validates every sample's tag set against `rules`.
std::vector<TrainingSample> decode_dataset(const std::string& bytes, const TagRules& rules,
                                           DataShape* shape_out = nullptr);
void save_dataset(const std::vector<TrainingSample>& samples, const DataShape& shape,
                  const std::filesystem::path& path);
std::vector<TrainingSample> load_dataset(const std::filesystem::path& path, const TagRules& rules,
                                         DataShape* shape_out = nullptr);

/// Size in bytes of an encoded dataset, from the format alone.
std::size_t dataset_file_size(const std::vector<TrainingSample>& samples, const DataShape& shape);

bool samples_equal(const TrainingSample& a, const TrainingSample& b);

}  // namespace tagmoe
