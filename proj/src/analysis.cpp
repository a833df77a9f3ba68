// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "tagmoe/binary_io.hpp"
#include "tagmoe/errors.hpp"
#include "tagmoe/trainer.hpp"

namespace tagmoe {

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double denom = std::sqrt(aa) * std::sqrt(bb);
  return denom > 0.0 ? dot / denom : 0.0;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Task ids in first-appearance order and the row indices of each.
std::vector<std::vector<std::size_t>> group_by_task(const SignatureTable& table) {
  std::vector<std::string> order;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto it = std::find(order.begin(), order.end(), table[i].task_id);
    if (it == order.end()) {
      order.push_back(table[i].task_id);
      groups.push_back({i});
    } else {
      groups[static_cast<std::size_t>(it - order.begin())].push_back(i);
    }
  }
  return groups;
}

void write_text(const std::filesystem::path& path, const std::string& text) { io::write_file(path.string(), text); }

}  // namespace

UtilizationReport expert_utilization(std::span<const RoutingRecord> records,
                                     std::span<const std::size_t> token_subset) {
  if (records.empty()) throw ContractError("expert_utilization: no routing records");
  const std::size_t layers = records.front().layers();
  const std::size_t experts = records.front().experts();
  UtilizationReport report;
  report.layers.assign(layers, std::vector<double>(experts, 0.0));
  std::vector<std::size_t> counted(layers, 0);
  for (const auto& rec : records) {
    if (rec.layers() != layers || rec.experts() != experts) {
      throw ContractError("expert_utilization: records disagree on layer or expert count");
    }
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t tokens = rec.probs(l).dim(0);
      const auto count_token = [&](std::size_t t) {
        if (t >= tokens) throw ContractError("expert_utilization: token index out of range");
        report.layers[l][rec.top1(l, t)] += 1.0;
        ++counted[l];
      };
      if (token_subset.empty()) {
        for (std::size_t t = 0; t < tokens; ++t) count_token(t);
      } else {
        for (const auto t : token_subset) count_token(t);
      }
    }
  }
  for (std::size_t l = 0; l < layers; ++l) {
    for (auto& v : report.layers[l]) v /= static_cast<double>(counted[l]);
  }
  return report;
}

double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mu = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (mu == 0.0) return 0.0;
  double var = 0.0;
  for (const double v : values) var += (v - mu) * (v - mu);
  return std::sqrt(var / n) / mu;
}

Heatmap token_heatmap(const RoutingRecord& record, std::size_t layer, std::size_t expert,
                      std::size_t cond_tokens, std::size_t target_tokens) {
  if (layer >= record.layers()) throw ContractError("token_heatmap: layer " + std::to_string(layer) + " out of range");
  if (expert >= record.experts()) throw ContractError("token_heatmap: expert " + std::to_string(expert) + " out of range");
  const Tensor& probs = record.probs(layer);
  if (probs.dim(0) != cond_tokens + target_tokens + 1) {
    throw ContractError("token_heatmap: record does not follow the declared token layout");
  }
  Heatmap map;
  map.rows.resize(3);
  for (std::size_t t = 0; t < cond_tokens; ++t) map.rows[0].push_back(probs.at(t, expert));
  for (std::size_t t = 0; t < target_tokens; ++t) map.rows[1].push_back(probs.at(cond_tokens + t, expert));
  map.rows[2].push_back(probs.at(cond_tokens + target_tokens, expert));
  return map;
}

std::uint8_t quantize_score(double score) {
  const double clamped = std::clamp(score, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

std::string heatmap_csv(const Heatmap& map) {
  std::string out;
  for (const auto& row : map.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += format_g17(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_pgm(const Heatmap& map) {
  std::size_t width = 0;
  for (const auto& row : map.rows) width = std::max(width, row.size());
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(map.rows.size()) + "\n255\n";
  for (const auto& row : map.rows) {
    for (std::size_t i = 0; i < width; ++i) {
      out.push_back(static_cast<char>(i < row.size() ? quantize_score(row[i]) : 0));
    }
  }
  return out;
}

SeparationMetrics signature_separation(const SignatureTable& table) {
  const auto groups = group_by_task(table);
  if (groups.size() < 2) throw ContractError("signature_separation needs at least two tasks");
  for (const auto& g : groups) {
    if (g.size() < 2) throw ContractError("signature_separation needs at least two rows per task");
  }
  std::vector<std::size_t> label(table.size());
  for (std::size_t c = 0; c < groups.size(); ++c) {
    for (const auto i : groups[c]) label[i] = c;
  }

  double within = 0.0;
  double between = 0.0;
  std::size_t n_within = 0;
  std::size_t n_between = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = i + 1; j < table.size(); ++j) {
      const double c = cosine(table[i].signature, table[j].signature);
      if (label[i] == label[j]) {
        within += c;
        ++n_within;
      } else {
        between += c;
        ++n_between;
      }
    }
  }
  SeparationMetrics m;
  m.within_cosine = within / static_cast<double>(n_within);
  m.between_cosine = between / static_cast<double>(n_between);
  m.margin = m.within_cosine - m.between_cosine;

  double sil = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::vector<double> mean_dist(groups.size(), 0.0);
    for (std::size_t c = 0; c < groups.size(); ++c) {
      double acc = 0.0;
      std::size_t n = 0;
      for (const auto j : groups[c]) {
        if (j == i) continue;
        acc += euclidean(table[i].signature, table[j].signature);
        ++n;
      }
      mean_dist[c] = acc / static_cast<double>(n);
    }
    const double a = mean_dist[label[i]];
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < groups.size(); ++c) {
      if (c != label[i]) b = std::min(b, mean_dist[c]);
    }
    const double denom = std::max(a, b);
    sil += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  m.silhouette = sil / static_cast<double>(table.size());
  return m;
}

ProbeResult tag_probe(const SignatureTable& table, std::size_t tag_count, double train_fraction,
                      std::uint64_t seed, double ridge) {
  if (table.empty()) throw ContractError("tag_probe: empty table");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("tag_probe: train_fraction must be in (0, 1)");
  const auto groups = group_by_task(table);
  Rng rng(seed);
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (auto g : groups) {
    if (g.size() < 2) throw ContractError("tag_probe: every task needs a row in both splits");
    std::shuffle(g.begin(), g.end(), rng);
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(g.size()))), 1, g.size() - 1);
    train.insert(train.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_train));
    test.insert(test.end(), g.begin() + static_cast<std::ptrdiff_t>(n_train), g.end());
  }
  const std::size_t features = table.front().signature.size() + 1;
  const auto design = [&](const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& g = table[rows[r]].signature;
      if (g.size() + 1 != features) throw ContractError("tag_probe: signatures differ in length");
      for (std::size_t c = 0; c < g.size(); ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = g[c];
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(features - 1)) = 1.0;
    }
    return x;
  };
  const Eigen::MatrixXd x_train = design(train);
  const Eigen::MatrixXd x_test = design(test);
  Eigen::MatrixXd gram = x_train.transpose() * x_train;
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);

  ProbeResult result;
  result.train_rows = train.size();
  result.test_rows = test.size();
  result.accuracy.assign(tag_count, 0.0);
  result.degenerate.assign(tag_count, false);
  double macro = 0.0;
  std::size_t counted = 0;
  for (std::size_t tag = 0; tag < tag_count; ++tag) {
    std::size_t present = 0;
    for (const auto& row : table) present += row.tags.contains(tag) ? 1 : 0;
    result.degenerate[tag] = present == 0 || present == table.size();
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
      y(static_cast<Eigen::Index>(r)) = table[train[r]].tags.contains(tag) ? 1.0 : 0.0;
    }
    const Eigen::VectorXd w = solver.solve(x_train.transpose() * y);
    const Eigen::VectorXd pred = x_test * w;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < test.size(); ++r) {
      const bool predicted = pred(static_cast<Eigen::Index>(r)) >= 0.5;
      correct += predicted == table[test[r]].tags.contains(tag) ? 1 : 0;
    }
    result.accuracy[tag] = static_cast<double>(correct) / static_cast<double>(test.size());
    if (!result.degenerate[tag]) {
      macro += result.accuracy[tag];
      ++counted;
    }
  }
  result.macro_accuracy = counted > 0 ? macro / static_cast<double>(counted) : std::nan("");
  return result;
}

double collapse_monitor(const Tensor& tag_embedding) {
  if (tag_embedding.rank() != 2) throw ShapeError("collapse_monitor expects a matrix");
  const std::size_t k = tag_embedding.dim(0);
  const std::size_t d = tag_embedding.dim(1);
  if (k < 2) return 0.0;
  const auto w = tag_embedding.data();
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      total += std::abs(cosine(w.subspan(i * d, d), w.subspan(j * d, d)));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

RoutingCollection collect_routing(const Model& model, const std::vector<TrainingSample>& samples,
                                  std::uint64_t seed) {
  NoGradGuard no_grad;
  RoutingCollection out;
  out.records.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const FlowState state = eval_flow_state(samples[i], seed, i);
    auto fwd = model.forward(samples[i].condition, state.zt, state.t);
    if (!fwd.record.empty()) {
      const Tensor g = aggregate_signature(fwd.record, model.config().signature_source);
      out.table.push_back({samples[i].task_id, samples[i].tags, g.to_vector()});
    }
    out.records.push_back(std::move(fwd.record));
  }
  return out;
}

std::map<std::string, double> write_report_bundle(const Model& model, const std::vector<TrainingSample>& samples,
                                                  const TagVocabulary& vocab, const std::filesystem::path& dir,
                                                  std::uint64_t seed, double train_fraction) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto& cfg = model.config();
  std::map<std::string, double> metrics;
  metrics["samples"] = static_cast<double>(samples.size());
  metrics["moe_layers"] = static_cast<double>(cfg.moe_blocks);
  metrics["experts"] = static_cast<double>(cfg.experts);
  metrics["eval_flow_loss"] = evaluate_flow_loss(model, samples, seed);
  metrics["tag_collapse"] = collapse_monitor(model.tag_embedding.weight);

  const RoutingCollection routing = collect_routing(model, samples, seed);
  if (cfg.moe_blocks > 0 && !samples.empty()) {
    const auto util = expert_utilization(routing.records);
    std::vector<std::size_t> target_tokens(cfg.target_tokens);
    std::iota(target_tokens.begin(), target_tokens.end(), cfg.cond_tokens);
    const auto util_target = expert_utilization(routing.records, target_tokens);

    const auto util_csv = [&](const UtilizationReport& r) {
      std::string s = "layer";
      for (std::size_t e = 0; e < cfg.experts; ++e) s += ",expert" + std::to_string(e);
      s += '\n';
      for (std::size_t l = 0; l < r.layers.size(); ++l) {
        s += std::to_string(l);
        for (const double v : r.layers[l]) s += "," + format_g17(v);
        s += '\n';
      }
      return s;
    };
    write_text(dir / "utilization.csv", util_csv(util));
    write_text(dir / "utilization_target.csv", util_csv(util_target));
    for (std::size_t l = 0; l < util.layers.size(); ++l) {
      metrics["utilization_cv_layer" + std::to_string(l)] = coefficient_of_variation(util.layers[l]);
    }

    std::string by_task = "task,layer";
    for (std::size_t e = 0; e < cfg.experts; ++e) by_task += ",expert" + std::to_string(e);
    by_task += '\n';
    fs::create_directories(dir / "heatmaps");
    std::vector<std::string> seen;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& task = samples[i].task_id;
      if (std::find(seen.begin(), seen.end(), task) != seen.end()) continue;
      seen.push_back(task);
      std::vector<RoutingRecord> task_records;
      for (std::size_t j = 0; j < samples.size(); ++j) {
        if (samples[j].task_id == task) task_records.push_back(routing.records[j]);
      }
      const auto task_util = expert_utilization(task_records);
      for (std::size_t l = 0; l < task_util.layers.size(); ++l) {
        by_task += task + "," + std::to_string(l);
        for (const double v : task_util.layers[l]) by_task += "," + format_g17(v);
        by_task += '\n';
      }
      // Heatmaps of the first sample of every task.
      for (std::size_t l = 0; l < routing.records[i].layers(); ++l) {
        for (std::size_t e = 0; e < cfg.experts; ++e) {
          const auto map = token_heatmap(routing.records[i], l, e, cfg.cond_tokens, cfg.target_tokens);
          const std::string stem = task + "_layer" + std::to_string(l) + "_expert" + std::to_string(e);
          write_text(dir / "heatmaps" / (stem + ".csv"), heatmap_csv(map));
          write_text(dir / "heatmaps" / (stem + ".pgm"), heatmap_pgm(map));
        }
      }
    }
    write_text(dir / "utilization_by_task.csv", by_task);

    std::string sig = "task,tags";
    for (std::size_t e = 0; e < cfg.experts; ++e) sig += ",g" + std::to_string(e);
    sig += '\n';
    for (const auto& row : routing.table) {
      std::string tags;
      for (const auto id : row.tags.ids()) tags += (tags.empty() ? "" : ";") + vocab.qualified_name(id);
      sig += row.task_id + "," + tags;
      for (const double v : row.signature) sig += "," + format_g17(v);
      sig += '\n';
    }
    write_text(dir / "signatures.csv", sig);

    const auto groups = group_by_task(routing.table);
    const bool enough = groups.size() >= 2 &&
                        std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() >= 2; });
    if (enough) {
      const auto sep = signature_separation(routing.table);
      metrics["separation_margin"] = sep.margin;
      metrics["silhouette"] = sep.silhouette;
      const auto probe = tag_probe(routing.table, vocab.size(), train_fraction, seed);
      metrics["probe_macro_accuracy"] = probe.macro_accuracy;
      for (std::size_t t = 0; t < vocab.size(); ++t) {
        metrics["probe_accuracy." + vocab.qualified_name(t)] = probe.accuracy[t];
      }
    }
  }

  std::string summary;
  for (const auto& [key, value] : metrics) summary += key + "=" + format_g17(value) + "\n";
  write_text(dir / "metrics.txt", summary);
  return metrics;
}

}  // namespace tagmoe
