// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/moe.hpp"

#include <cstdio>
#include <fstream>

#include "tagmoe/errors.hpp"
#include "tagmoe/ops.hpp"

namespace tagmoe {

SignatureSource parse_signature_source(const std::string& text) {
  if (text == "dense") return SignatureSource::kDense;
  if (text == "sparse") return SignatureSource::kSparse;
  throw ConfigError("signature_source must be 'dense' or 'sparse', got '" + text + "'");
}

std::string to_string(SignatureSource source) {
  return source == SignatureSource::kDense ? "dense" : "sparse";
}

void RoutingRecord::append(Tensor probs, std::vector<std::vector<std::size_t>> selected) {
  if (probs.rank() != 2 || selected.size() != probs.dim(0)) {
    throw ContractError("routing record: selections must cover every token row");
  }
  probs_.push_back(std::move(probs));
  selected_.push_back(std::move(selected));
}

std::size_t RoutingRecord::tokens() const { return probs_.empty() ? 0 : probs_.front().dim(0); }

std::size_t RoutingRecord::experts() const { return probs_.empty() ? 0 : probs_.front().dim(1); }

void RoutingRecord::check_uniform() const {
  for (const auto& p : probs_) {
    if (p.shape() != probs_.front().shape()) {
      throw ContractError("routing record is ragged: layer shapes " + shape_string(probs_.front().shape()) +
                          " and " + shape_string(p.shape()));
    }
  }
}

std::vector<std::size_t> RoutingRecord::routing_key() const {
  std::vector<std::size_t> key;
  for (const auto& layer : selected_) {
    for (const auto& token : layer) key.insert(key.end(), token.begin(), token.end());
  }
  return key;
}

MoELayer::MoELayer(const MoeShape& shape, Rng& rng) : top_k(shape.top_k), gate_noise(shape.gate_noise) {
  if (shape.experts == 0 || shape.top_k < 1 || shape.top_k > shape.experts) {
    throw ConfigError("MoE needs 1 <= top_k <= experts, got top_k=" + std::to_string(shape.top_k) +
                      " experts=" + std::to_string(shape.experts));
  }
  const std::size_t gate_hidden = shape.gate_hidden == 0 ? shape.dim : shape.gate_hidden;
  experts.reserve(shape.experts);
  for (std::size_t e = 0; e < shape.experts; ++e) experts.push_back(make_dense_ffn(shape.dim, shape.ffn_hidden, rng));
  gate = Mlp(shape.dim, gate_hidden, shape.experts, rng);
}

Tensor MoELayer::gate_forward(const Tensor& x, Rng* noise_rng) const {
  Tensor logits = gate.forward(x);
  if (noise_rng != nullptr && gate_noise > 0.0) {
    std::normal_distribution<double> dist(0.0, gate_noise);
    std::vector<double> noise(logits.numel());
    for (auto& v : noise) v = dist(*noise_rng);
    logits = add(logits, Tensor::from_data(logits.shape(), std::move(noise)));
  }
  return softmax(logits, 1);
}

Tensor MoELayer::forward(const Tensor& x, RoutingRecord& record, Rng* noise_rng) const {
  const Tensor probs = gate_forward(x, noise_rng);
  auto selected = topk_indices(probs, top_k);
  const std::size_t tokens = x.dim(0);

  Tensor out;
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  for (std::size_t e = 0; e < experts.size(); ++e) {
    rows.clear();
    for (std::size_t t = 0; t < tokens; ++t) {
      for (const auto choice : selected[t]) {
        if (choice == e) rows.push_back(t);
      }
    }
    if (rows.empty()) continue;
    cols.assign(rows.size(), e);
    const Tensor expert_out = experts[e].forward(gather_rows(x, rows));
    const Tensor weighted = scale_rows(expert_out, gather_elements(probs, rows, cols));
    const Tensor placed = scatter_rows(weighted, rows, tokens);
    out = out.defined() ? add(out, placed) : placed;
  }
  record.append(probs, std::move(selected));
  return out;
}

void MoELayer::collect(const std::string& prefix, ParameterList& out) const {
  gate.collect(prefix + ".gate", out);
  for (std::size_t e = 0; e < experts.size(); ++e) experts[e].collect(prefix + ".expert" + std::to_string(e), out);
}

Tensor load_balance_loss(const RoutingRecord& record) {
  if (record.empty()) throw ContractError("load_balance_loss: empty routing record");
  Tensor total;
  for (std::size_t l = 0; l < record.layers(); ++l) {
    const Tensor& probs = record.probs(l);
    const std::size_t tokens = probs.dim(0);
    const std::size_t n = probs.dim(1);
    std::vector<double> fraction(n, 0.0);
    for (std::size_t t = 0; t < tokens; ++t) fraction[record.top1(l, t)] += 1.0;
    for (auto& f : fraction) f /= static_cast<double>(tokens);
    const Tensor mean_prob = mean(probs, {0});
    const Tensor layer_loss =
        scale(sum(mul(mean_prob, Tensor::from_data({n}, std::move(fraction)))), static_cast<double>(n));
    total = total.defined() ? add(total, layer_loss) : layer_loss;
  }
  return scale(total, 1.0 / static_cast<double>(record.layers()));
}

Tensor aggregate_signature(const RoutingRecord& record, SignatureSource source) {
  if (record.empty()) throw ContractError("aggregate_signature: empty routing record");
  record.check_uniform();
  const std::size_t tokens = record.tokens();
  const std::size_t n = record.experts();
  Tensor total;
  for (std::size_t l = 0; l < record.layers(); ++l) {
    Tensor scores = record.probs(l);
    if (source == SignatureSource::kSparse) {
      std::vector<double> mask(tokens * n, 0.0);
      for (std::size_t t = 0; t < tokens; ++t) {
        for (const auto e : record.selected(l)[t]) mask[t * n + e] = 1.0;
      }
      scores = mul(scores, Tensor::from_data({tokens, n}, std::move(mask)));
    }
    const Tensor per_layer = sum(scores, 0);
    total = total.defined() ? add(total, per_layer) : per_layer;
  }
  return scale(total, 1.0 / static_cast<double>(tokens * record.layers()));
}

std::string format_g17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<std::filesystem::path> export_routing_csv(const RoutingRecord& record,
                                                      const std::filesystem::path& prefix) {
  std::vector<std::filesystem::path> written;
  for (std::size_t l = 0; l < record.layers(); ++l) {
    std::filesystem::path path = prefix;
    path += "_layer" + std::to_string(l) + ".csv";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    const Tensor& p = record.probs(l);
    for (std::size_t t = 0; t < p.dim(0); ++t) {
      for (std::size_t e = 0; e < p.dim(1); ++e) {
        if (e > 0) out << ',';
        out << format_g17(p.at(t, e));
      }
      out << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace tagmoe
