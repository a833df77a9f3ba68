// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "tagmoe/binary_io.hpp"
#include "tagmoe/errors.hpp"
#include "tagmoe/rng.hpp"

namespace tagmoe {

namespace {

constexpr char kDatasetMagic[] = "TAGDS1";
constexpr std::size_t kDatasetMagicLength = sizeof(kDatasetMagic) - 1;

TaskSpec make_task(std::string id, std::string family, TaskKind kind, std::size_t slot,
                   std::vector<std::size_t> marked = {}) {
  constexpr std::size_t kSlots = 7;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(slot) / static_cast<double>(kSlots);
  return {std::move(id), std::move(family), kind, kAnchorRadius * std::cos(angle),
          kAnchorRadius * std::sin(angle), std::move(marked)};
}

}  // namespace

void DataShape::validate() const {
  if (point_dim != 2) throw ConfigError("synthetic tasks are planar: point_dim must be 2");
  if (target_tokens < 3) throw ConfigError("target_tokens must be at least 3");
  if (cond_tokens != target_tokens + 1) {
    throw ConfigError("cond_tokens must equal target_tokens + 1 (instruction marker + source points)");
  }
}

std::vector<TaskSpec> default_task_registry() {
  return {
      make_task("shift-local", "local-edit", TaskKind::kShiftLocal, 0, {0, 1}),
      make_task("unshift-local", "local-edit", TaskKind::kUnshiftLocal, 1, {0, 1}),
      make_task("recolor-local", "local-edit", TaskKind::kRecolorLocal, 2, {0, 1}),
      make_task("global-rotate", "global-edit", TaskKind::kRotate, 3),
      make_task("global-scale", "global-edit", TaskKind::kScale, 4),
      make_task("global-restyle", "re-render", TaskKind::kRestyleRing, 5),
      make_task("restyle-grid", "re-render", TaskKind::kRestyleGrid, 6),
  };
}

const TaskSpec& find_task(const std::vector<TaskSpec>& registry, const std::string& id) {
  const auto it = std::find_if(registry.begin(), registry.end(), [&](const TaskSpec& t) { return t.id == id; });
  if (it == registry.end()) throw RegistryError("unknown task '" + id + "'");
  return *it;
}

std::vector<double> apply_task_map(const TaskSpec& spec, const std::vector<double>& source) {
  std::vector<double> out = source;
  const std::size_t n = source.size() / 2;
  switch (spec.kind) {
    case TaskKind::kShiftLocal:
    case TaskKind::kUnshiftLocal: {
      const double dx = spec.kind == TaskKind::kShiftLocal ? kShiftDistance : -kShiftDistance;
      for (const auto i : spec.marked) out[2 * i] += dx;
      break;
    }
    case TaskKind::kRecolorLocal: {
      double cx = 0.0;
      double cy = 0.0;
      for (const auto i : spec.marked) {
        cx += source[2 * i];
        cy += source[2 * i + 1];
      }
      cx /= static_cast<double>(spec.marked.size());
      cy /= static_cast<double>(spec.marked.size());
      for (const auto i : spec.marked) {
        out[2 * i] = cx + 0.5 * (source[2 * i] - cx);
        out[2 * i + 1] = cy + 0.5 * (source[2 * i + 1] - cy);
      }
      break;
    }
    case TaskKind::kRotate:
      for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = -source[2 * i + 1];
        out[2 * i + 1] = source[2 * i];
      }
      break;
    case TaskKind::kScale:
      for (auto& v : out) v *= 1.5;
      break;
    case TaskKind::kRestyleRing:
      for (std::size_t i = 0; i < n; ++i) {
        const double r = std::hypot(source[2 * i], source[2 * i + 1]);
        out[2 * i] = r > 1e-9 ? source[2 * i] / r : 1.0;
        out[2 * i + 1] = r > 1e-9 ? source[2 * i + 1] / r : 0.0;
      }
      break;
    case TaskKind::kRestyleGrid:
      for (auto& v : out) v = std::round(2.0 * v) / 2.0;
      break;
  }
  return out;
}

std::vector<TrainingSample> generate(const TaskSpec& spec, std::size_t n, std::uint64_t seed,
                                     const DataShape& shape, const TagRules& rules) {
  shape.validate();
  const TagSet tags = annotate_synthetic(spec.id, rules);
  const std::size_t points = shape.target_tokens;
  std::vector<TrainingSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, spec.id, i));
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    std::normal_distribution<double> jitter(0.0, kMarkerJitter);
    std::normal_distribution<double> edit_noise(0.0, kEditNoise);

    std::vector<double> source(points * 2);
    for (auto& v : source) v = uniform(rng);
    std::vector<double> condition;
    condition.reserve(shape.cond_tokens * 2);
    condition.push_back(spec.anchor_x + jitter(rng));
    condition.push_back(spec.anchor_y + jitter(rng));
    condition.insert(condition.end(), source.begin(), source.end());

    std::vector<double> target = apply_task_map(spec, source);
    for (std::size_t k = 0; k < target.size(); ++k) {
      // Preserved coordinates are copied exactly; only edited ones get noise.
      if (target[k] != source[k]) target[k] += edit_noise(rng);
    }
    samples.push_back({Tensor::from_data({shape.cond_tokens, 2}, std::move(condition)),
                       Tensor::from_data({points, 2}, std::move(target)), tags, spec.id});
  }
  return samples;
}

std::vector<TrainingSample> generate_mixed(const std::vector<TaskSpec>& registry, std::size_t per_task,
                                           std::uint64_t seed, const DataShape& shape, const TagRules& rules) {
  std::vector<TrainingSample> all;
  all.reserve(registry.size() * per_task);
  for (const auto& spec : registry) {
    auto part = generate(spec, per_task, seed, shape, rules);
    std::move(part.begin(), part.end(), std::back_inserter(all));
  }
  return all;
}

std::string encode_dataset(const std::vector<TrainingSample>& samples, const DataShape& shape) {
  std::vector<std::string> tasks;
  for (const auto& s : samples) {
    if (std::find(tasks.begin(), tasks.end(), s.task_id) == tasks.end()) tasks.push_back(s.task_id);
  }
  std::string out(kDatasetMagic, kDatasetMagicLength);
  io::put_uint<std::uint32_t>(out, kDatasetVersion);
  io::put_uint<std::uint64_t>(out, samples.size());
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(shape.cond_tokens));
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(shape.target_tokens));
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(shape.point_dim));
  io::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(tasks.size()));
  for (const auto& t : tasks) {
    io::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(t.size()));
    out += t;
  }
  for (const auto& s : samples) {
    if (s.condition.shape() != Shape{shape.cond_tokens, shape.point_dim} ||
        s.target.shape() != Shape{shape.target_tokens, shape.point_dim}) {
      throw ShapeError("sample of task '" + s.task_id + "' does not match the dataset shape");
    }
    const auto task_index = std::find(tasks.begin(), tasks.end(), s.task_id) - tasks.begin();
    io::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(task_index));
    io::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(s.tags.size()));
    for (const auto id : s.tags.ids()) io::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(id));
    for (const double v : s.condition.data()) io::put_f64(out, v);
    for (const double v : s.target.data()) io::put_f64(out, v);
  }
  return out;
}

std::vector<TrainingSample> decode_dataset(const std::string& bytes, const TagRules& rules, DataShape* shape_out) {
  io::Reader in(bytes);
  if (in.get_bytes(kDatasetMagicLength, "magic") != std::string_view(kDatasetMagic, kDatasetMagicLength)) {
    throw LoadError("not a TAGDS1 dataset (bad magic)", 0);
  }
  const auto version = in.get_uint<std::uint32_t>("version");
  if (version != kDatasetVersion) {
    throw LoadError("dataset version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kDatasetVersion) + ")",
                    in.offset() - 4);
  }
  const auto count = in.get_uint<std::uint64_t>("sample count");
  DataShape shape;
  shape.cond_tokens = in.get_uint<std::uint32_t>("cond_tokens");
  shape.target_tokens = in.get_uint<std::uint32_t>("target_tokens");
  shape.point_dim = in.get_uint<std::uint32_t>("point_dim");
  const auto task_count = in.get_uint<std::uint32_t>("task count");
  std::vector<std::string> tasks;
  for (std::uint32_t i = 0; i < task_count; ++i) {
    const auto len = in.get_uint<std::uint16_t>("task id length");
    tasks.emplace_back(in.get_bytes(len, "task id"));
  }
  const std::size_t cond_values = shape.cond_tokens * shape.point_dim;
  const std::size_t target_values = shape.target_tokens * shape.point_dim;
  if (count > in.remaining() / (4 + 8 * (cond_values + target_values) + 1)) {
    throw LoadError("header declares more samples than the file holds", in.offset());
  }
  std::vector<TrainingSample> samples;
  samples.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t sample_offset = in.offset();
    const auto task_index = in.get_uint<std::uint16_t>("task index");
    if (task_index >= tasks.size()) throw LoadError("task index out of range", sample_offset);
    const auto tag_count = in.get_uint<std::uint16_t>("tag count");
    std::vector<std::size_t> ids(tag_count);
    for (auto& id : ids) id = in.get_uint<std::uint16_t>("tag id");
    std::vector<double> cond(cond_values);
    for (auto& v : cond) v = in.get_f64("condition");
    std::vector<double> target(target_values);
    for (auto& v : target) v = in.get_f64("target");
    const std::string& task = tasks[task_index];
    TagSet tags;
    try {
      tags = TagSet(std::move(ids));
    } catch (const ContractError& e) {
      throw LoadError(std::string("sample ") + std::to_string(i) + ": " + e.what(), sample_offset);
    }
    if (!rules.contains(task) || !(rules.lookup(task) == tags)) {
      throw LoadError("sample " + std::to_string(i) + " of task '" + task + "' has tags that disagree with the rule table",
                      sample_offset);
    }
    samples.push_back({Tensor::from_data({shape.cond_tokens, shape.point_dim}, std::move(cond)),
                       Tensor::from_data({shape.target_tokens, shape.point_dim}, std::move(target)),
                       std::move(tags), task});
  }
  if (in.remaining() != 0) throw LoadError("trailing bytes after last sample", in.offset());
  if (shape_out != nullptr) *shape_out = shape;
  return samples;
}

void save_dataset(const std::vector<TrainingSample>& samples, const DataShape& shape,
                  const std::filesystem::path& path) {
  io::write_file(path.string(), encode_dataset(samples, shape));
}

std::vector<TrainingSample> load_dataset(const std::filesystem::path& path, const TagRules& rules,
                                         DataShape* shape_out) {
  return decode_dataset(io::read_file(path.string()), rules, shape_out);
}

std::size_t dataset_file_size(const std::vector<TrainingSample>& samples, const DataShape& shape) {
  std::set<std::string> tasks;
  std::size_t size = kDatasetMagicLength + 4 + 8 + 4 * 4;
  for (const auto& s : samples) {
    if (tasks.insert(s.task_id).second) size += 2 + s.task_id.size();
    size += 2 + 2 + 2 * s.tags.size() + 8 * (shape.cond_tokens + shape.target_tokens) * shape.point_dim;
  }
  return size;
}

bool samples_equal(const TrainingSample& a, const TrainingSample& b) {
  const auto eq = [](const Tensor& x, const Tensor& y) {
    if (x.shape() != y.shape()) return false;
    const auto xv = x.data();
    const auto yv = y.data();
    return std::equal(xv.begin(), xv.end(), yv.begin(), [](double p, double q) {
      return std::bit_cast<std::uint64_t>(p) == std::bit_cast<std::uint64_t>(q);
    });
  };
  return a.task_id == b.task_id && a.tags == b.tags && eq(a.condition, b.condition) && eq(a.target, b.target);
}

}  // namespace tagmoe
