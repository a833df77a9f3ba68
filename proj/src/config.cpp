// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/config.hpp"

#include <fstream>
#include <map>
#include <set>

#include "tagmoe/errors.hpp"
#include "tagmoe/rng.hpp"

namespace tagmoe {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& where, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError("'" + where + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (allowed.count(key) == 0) {
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type: " + e.what());
  }
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out[prefix] = j;
  }
}

}  // namespace

void RunConfig::resolve() {
  model.seed = seed;
  train.seed = derive_seed(seed, "train", 0);
  model.validate();
  if (train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (samples_per_task == 0) throw ConfigError("data.samples_per_task must be positive");
  if (eval_samples_per_task < 2) throw ConfigError("data.eval_samples_per_task must be at least 2");
  if (!(probe_train_fraction > 0.0 && probe_train_fraction < 1.0)) {
    throw ConfigError("analysis.probe_train_fraction must lie in (0, 1)");
  }
}

std::uint64_t RunConfig::data_seed() const { return derive_seed(seed, "data", 0); }
std::uint64_t RunConfig::eval_seed() const { return derive_seed(seed, "eval-set", 0); }

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["model"] = {{"dim", model.dim},
                {"blocks", model.blocks},
                {"moe_blocks", model.moe_blocks},
                {"experts", model.experts},
                {"top_k", model.top_k},
                {"ffn_hidden", model.ffn_hidden},
                {"gate_hidden", model.gate_hidden},
                {"head_hidden", model.head_hidden},
                {"matched_dense_blocks", model.matched_dense_blocks},
                {"matched_dense_hidden", model.matched_dense_hidden},
                {"point_dim", model.point_dim},
                {"cond_tokens", model.cond_tokens},
                {"target_tokens", model.target_tokens},
                {"gate_noise", model.gate_noise},
                {"signature_source", to_string(model.signature_source)},
                {"train_tag_embeddings", model.train_tag_embeddings}};
  j["loss"] = {{"lambda_lbl", model.lambda_lbl}, {"lambda_align", model.lambda_align}};
  j["train"] = {{"steps", train.steps},           {"batch_size", train.batch_size}, {"lr", train.lr},
                {"beta1", train.beta1},           {"beta2", train.beta2},           {"adam_eps", train.adam_eps},
                {"eval_every", eval_every},       {"log_wall_time", log_wall_time}};
  j["data"] = {{"samples_per_task", samples_per_task},
               {"eval_samples_per_task", eval_samples_per_task},
               {"tasks", tasks},
               {"dataset", dataset_path},
               {"vocab", vocab_path},
               {"rules", rules_path}};
  j["analysis"] = {{"probe_train_fraction", probe_train_fraction}};
  j["output"] = {{"dir", output_dir}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "", {"seed", "model", "loss", "train", "data", "analysis", "output"});
  read(j, "seed", c.seed, "");
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, "model",
                   {"dim", "blocks", "moe_blocks", "experts", "top_k", "ffn_hidden", "gate_hidden", "head_hidden",
                    "matched_dense_blocks", "matched_dense_hidden", "point_dim", "cond_tokens", "target_tokens",
                    "gate_noise", "signature_source", "train_tag_embeddings"});
    read(m, "dim", c.model.dim, "model");
    read(m, "blocks", c.model.blocks, "model");
    read(m, "moe_blocks", c.model.moe_blocks, "model");
    read(m, "experts", c.model.experts, "model");
    read(m, "top_k", c.model.top_k, "model");
    read(m, "ffn_hidden", c.model.ffn_hidden, "model");
    read(m, "gate_hidden", c.model.gate_hidden, "model");
    read(m, "head_hidden", c.model.head_hidden, "model");
    read(m, "matched_dense_blocks", c.model.matched_dense_blocks, "model");
    read(m, "matched_dense_hidden", c.model.matched_dense_hidden, "model");
    read(m, "point_dim", c.model.point_dim, "model");
    read(m, "cond_tokens", c.model.cond_tokens, "model");
    read(m, "target_tokens", c.model.target_tokens, "model");
    read(m, "gate_noise", c.model.gate_noise, "model");
    std::string source = to_string(c.model.signature_source);
    read(m, "signature_source", source, "model");
    c.model.signature_source = parse_signature_source(source);
    read(m, "train_tag_embeddings", c.model.train_tag_embeddings, "model");
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    reject_unknown(l, "loss", {"lambda_lbl", "lambda_align"});
    read(l, "lambda_lbl", c.model.lambda_lbl, "loss");
    read(l, "lambda_align", c.model.lambda_align, "loss");
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t, "train", {"steps", "batch_size", "lr", "beta1", "beta2", "adam_eps", "eval_every", "log_wall_time"});
    read(t, "steps", c.train.steps, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "lr", c.train.lr, "train");
    read(t, "beta1", c.train.beta1, "train");
    read(t, "beta2", c.train.beta2, "train");
    read(t, "adam_eps", c.train.adam_eps, "train");
    read(t, "eval_every", c.eval_every, "train");
    read(t, "log_wall_time", c.log_wall_time, "train");
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data", {"samples_per_task", "eval_samples_per_task", "tasks", "dataset", "vocab", "rules"});
    read(d, "samples_per_task", c.samples_per_task, "data");
    read(d, "eval_samples_per_task", c.eval_samples_per_task, "data");
    read(d, "tasks", c.tasks, "data");
    read(d, "dataset", c.dataset_path, "data");
    read(d, "vocab", c.vocab_path, "data");
    read(d, "rules", c.rules_path, "data");
  }
  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    reject_unknown(a, "analysis", {"probe_train_fraction"});
    read(a, "probe_train_fraction", c.probe_train_fraction, "analysis");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    reject_unknown(o, "output", {"dir"});
    read(o, "dir", c.output_dir, "output");
  }
  c.resolve();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
  std::map<std::string, json> fa;
  std::map<std::string, json> fb;
  flatten(a.to_json(), "", fa);
  flatten(b.to_json(), "", fb);
  std::vector<std::string> keys;
  for (const auto& [k, v] : fa) {
    const auto it = fb.find(k);
    if (it == fb.end() || it->second != v) keys.push_back(k);
  }
  for (const auto& [k, v] : fb) {
    if (fa.count(k) == 0) keys.push_back(k);
  }
  return keys;
}

}  // namespace tagmoe
