// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tagmoe/nn.hpp"

namespace tagmoe {

/// Which per-token vector feeds the routing signature: the dense gate
/// distribution, or that distribution masked to the selected top-k experts.
enum class SignatureSource { kDense, kSparse };

SignatureSource parse_signature_source(const std::string& text);
std::string to_string(SignatureSource source);

/// Per-layer gate distributions captured during one forward pass.
///
/// Layer l holds the dense post-softmax distribution S_l [T x N] (still
/// attached to the graph, so signatures built from it backpropagate into the
/// gates) and the top-k expert choices of every token.
class RoutingRecord {
 public:
  void append(Tensor probs, std::vector<std::vector<std::size_t>> selected);

  [[nodiscard]] bool empty() const { return probs_.empty(); }
  [[nodiscard]] std::size_t layers() const { return probs_.size(); }
  /// Token count of the first layer (0 when empty).
  [[nodiscard]] std::size_t tokens() const;
  [[nodiscard]] std::size_t experts() const;

  [[nodiscard]] const Tensor& probs(std::size_t layer) const { return probs_.at(layer); }
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& selected(std::size_t layer) const {
    return selected_.at(layer);
  }
  /// Top-1 expert of `token` in `layer`.
  [[nodiscard]] std::size_t top1(std::size_t layer, std::size_t token) const {
    return selected_.at(layer).at(token).front();
  }

  /// Throws ContractError when layers disagree on token or expert count.
  void check_uniform() const;
  /// All routing choices flattened, layer-major; identifies the routing region.
  [[nodiscard]] std::vector<std::size_t> routing_key() const;

 private:
  std::vector<Tensor> probs_;
  std::vector<std::vector<std::vector<std::size_t>>> selected_;
};

struct MoeShape {
  std::size_t dim = 0;
  std::size_t ffn_hidden = 0;
  std::size_t experts = 4;
  std::size_t top_k = 1;
  std::size_t gate_hidden = 0;  // 0 selects dim
  double gate_noise = 0.0;      // stddev of Gaussian logit noise, training only
};

/// Sparse mixture-of-experts feed-forward layer.
///
/// Every token is sent to its top-k experts under the gate distribution p and
/// the layer returns sum_{i in topk} p_i E_i(x). The weights are the dense
/// softmax probabilities, not renormalized over the selected experts, so the
/// gate receives gradient through the mixing weights.
class MoELayer {
 public:
  MoELayer() = default;
  MoELayer(const MoeShape& shape, Rng& rng);

  /// Dense gate distribution [T x N]. With `noise_rng` and gate_noise > 0,
  /// Gaussian noise is added to the logits first.
  [[nodiscard]] Tensor gate_forward(const Tensor& x, Rng* noise_rng = nullptr) const;
  /// Routes x [T x D] and appends this layer's distribution to `record`.
  [[nodiscard]] Tensor forward(const Tensor& x, RoutingRecord& record, Rng* noise_rng = nullptr) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  [[nodiscard]] std::size_t expert_count() const { return experts.size(); }

  std::vector<DenseFFN> experts;
  Mlp gate;
  std::size_t top_k = 1;
  double gate_noise = 0.0;
};

/// N * sum_i f_i P_i per layer, averaged over layers. f_i is the share of
/// tokens whose top-1 expert is i (constant), P_i the mean gate probability
/// of expert i (differentiable). Empty record: ContractError.
Tensor load_balance_loss(const RoutingRecord& record);

/// g = 1/(T L) sum_t sum_l S_{l,t}, an N-vector on the probability simplex
/// for the dense source.
Tensor aggregate_signature(const RoutingRecord& record,
                           SignatureSource source = SignatureSource::kDense);

/// Shortest decimal text with 17 significant digits.
std::string format_g17(double value);

/// Writes one CSV per layer, `<prefix>_layer<l>.csv`, T rows x N columns.
std::vector<std::filesystem::path> export_routing_csv(const RoutingRecord& record,
                                                      const std::filesystem::path& prefix);

}  // namespace tagmoe
