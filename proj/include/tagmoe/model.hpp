// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tagmoe/block.hpp"
#include "tagmoe/data.hpp"
#include "tagmoe/semantics.hpp"

namespace tagmoe {

struct BackboneConfig {
  std::size_t dim = 32;
  std::size_t blocks = 4;
  /// Trailing blocks whose FFN is a mixture of experts.
  std::size_t moe_blocks = 2;
  std::size_t experts = 4;
  std::size_t top_k = 1;
  /// Width of the dense FFN and of every expert.
  std::size_t ffn_hidden = 64;
  std::size_t gate_hidden = 0;  // 0 selects dim
  std::size_t head_hidden = 0;  // 0 selects 4 * experts
  /// Trailing dense blocks widened to `matched_dense_hidden` (dense ablation arm).
  std::size_t matched_dense_blocks = 0;
  std::size_t matched_dense_hidden = 0;
  std::size_t point_dim = 2;
  std::size_t cond_tokens = 7;
  std::size_t target_tokens = 6;
  double lambda_lbl = 0.01;
  double lambda_align = 0.1;
  double gate_noise = 0.0;
  SignatureSource signature_source = SignatureSource::kDense;
  bool train_tag_embeddings = false;
  std::uint64_t seed = 0;

  void validate() const;
  /// cond_tokens + target_tokens + 1 (timestep token).
  [[nodiscard]] std::size_t sequence_length() const { return cond_tokens + target_tokens + 1; }
  [[nodiscard]] std::size_t resolved_gate_hidden() const { return gate_hidden == 0 ? dim : gate_hidden; }
  [[nodiscard]] std::size_t resolved_head_hidden() const { return head_hidden == 0 ? 4 * experts : head_hidden; }
  [[nodiscard]] DataShape data_shape() const { return {cond_tokens, target_tokens, point_dim}; }
};

/// Multiply-accumulates per token spent in one top-k MoE slot (gate + k experts).
std::size_t moe_macs_per_token(const BackboneConfig& config);
/// Dense FFN width whose per-token multiply-accumulates match one top-k MoE
/// slot: round((k * 2 D H + D G + G N) / (2 D)).
std::size_t matched_dense_hidden(const BackboneConfig& config);
/// Activated FFN-slot multiply-accumulates per token, summed over blocks.
std::size_t activated_ffn_macs_per_token(const BackboneConfig& config);

/// Rectified-flow state: zt = (1 - t) z1 + t z0, velocity target z0 - z1.
/// t = 0 is pure noise, t = 1 is data.
struct FlowState {
  Tensor z0;
  Tensor z1;
  Tensor zt;
  double t = 0.0;

  static FlowState make(const Tensor& z0, const Tensor& z1, double t);
};

struct LossBreakdown {
  double flow = 0.0;
  double lbl = 0.0;
  double align = 0.0;
  double total = 0.0;
};

struct ForwardResult {
  Tensor velocity;  // [target_tokens x point_dim]
  RoutingRecord record;
};

struct LossResult {
  Tensor total;  // scalar carrying the graph
  LossBreakdown parts;
  RoutingRecord record;
  Tensor signature;  // undefined for models without MoE blocks
};

/// Mean squared error between predicted velocity and z0 - z1.
Tensor flow_loss(const Tensor& velocity, const FlowState& state);

/// Task-conditioned flow-matching transformer with MoE feed-forwards in the
/// trailing blocks, plus the semantic side (W_tag and the prediction head).
///
/// Sequence layout: [condition tokens | noisy-target tokens | timestep token].
/// A learned projection of the sinusoidal timestep embedding is added to
/// every token before the block stack.
class Model {
 public:
  Model(const BackboneConfig& config, std::size_t tag_count);

  [[nodiscard]] Tensor assemble_tokens(const Tensor& condition, const Tensor& zt, double t) const;
  [[nodiscard]] ForwardResult forward(const Tensor& condition, const Tensor& zt, double t,
                                      Rng* noise_rng = nullptr) const;
  /// L_flow + lambda_lbl L_lbl + lambda_align L_align. Terms with a zero
  /// weight are reported but kept out of the graph.
  [[nodiscard]] LossResult total_loss(const TrainingSample& sample, const FlowState& state,
                                      Rng* noise_rng = nullptr) const;

  /// Every tensor, in checkpoint order.
  [[nodiscard]] ParameterList parameters() const;
  /// Tensors updated by the optimizer (W_tag only when trainable).
  [[nodiscard]] ParameterList trainable_parameters() const;
  [[nodiscard]] std::size_t parameter_count() const { return tagmoe::parameter_count(parameters()); }
  [[nodiscard]] const BackboneConfig& config() const { return config_; }

  Linear condition_in;
  Tensor condition_position;  // [cond_tokens x D]
  Linear target_in;
  Tensor target_position;  // [target_tokens x D]
  Linear time_in;
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;
  Linear velocity_out;
  TagEmbedding tag_embedding;
  PredictionHead head;

 private:
  BackboneConfig config_;
};

/// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const BackboneConfig& config, std::size_t tag_count);

}  // namespace tagmoe
