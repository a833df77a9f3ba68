// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/model.hpp"

#include <cmath>

#include "tagmoe/errors.hpp"
#include "tagmoe/ops.hpp"

namespace tagmoe {

void BackboneConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (dim == 0 || dim % 2 != 0) fail("dim must be even and positive");
  if (blocks == 0) fail("blocks must be positive");
  if (moe_blocks > blocks) fail("moe_blocks must not exceed blocks");
  if (experts == 0) fail("experts must be positive");
  if (top_k < 1 || top_k > experts) fail("top_k must lie in [1, experts]");
  if (ffn_hidden == 0) fail("ffn_hidden must be positive");
  if (matched_dense_blocks + moe_blocks > blocks) fail("matched_dense_blocks + moe_blocks must not exceed blocks");
  if (matched_dense_blocks > 0 && matched_dense_hidden == 0) fail("matched_dense_hidden must be set");
  if (point_dim == 0 || cond_tokens == 0 || target_tokens == 0) fail("token counts and point_dim must be positive");
  if (!(lambda_lbl >= 0.0) || !(lambda_align >= 0.0)) fail("loss weights must be non-negative");
  if (!(gate_noise >= 0.0)) fail("gate_noise must be non-negative");
}

std::size_t moe_macs_per_token(const BackboneConfig& c) {
  const std::size_t g = c.resolved_gate_hidden();
  return c.top_k * 2 * c.dim * c.ffn_hidden + c.dim * g + g * c.experts;
}

std::size_t matched_dense_hidden(const BackboneConfig& c) {
  const double width = static_cast<double>(moe_macs_per_token(c)) / static_cast<double>(2 * c.dim);
  return static_cast<std::size_t>(std::lround(width));
}

std::size_t activated_ffn_macs_per_token(const BackboneConfig& c) {
  const std::size_t plain = c.blocks - c.moe_blocks - c.matched_dense_blocks;
  return plain * 2 * c.dim * c.ffn_hidden + c.matched_dense_blocks * 2 * c.dim * c.matched_dense_hidden +
         c.moe_blocks * moe_macs_per_token(c);
}

FlowState FlowState::make(const Tensor& z0, const Tensor& z1, double t) {
  if (z0.shape() != z1.shape()) throw ShapeError("flow state: z0 and z1 shapes differ");
  std::vector<double> zt(z0.numel());
  const auto a = z0.data();
  const auto b = z1.data();
  for (std::size_t i = 0; i < zt.size(); ++i) zt[i] = (1.0 - t) * b[i] + t * a[i];
  return {z0, z1, Tensor::from_data(z0.shape(), std::move(zt)), t};
}

Tensor flow_loss(const Tensor& velocity, const FlowState& state) {
  if (velocity.shape() != state.z0.shape()) {
    throw ShapeError("flow_loss: velocity " + shape_string(velocity.shape()) + " vs target " +
                     shape_string(state.z0.shape()));
  }
  const Tensor target = sub(state.z0, state.z1);
  return mean(square(sub(velocity, target)));
}

Model::Model(const BackboneConfig& config, std::size_t tag_count) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const std::size_t d = config_.dim;
  condition_in = Linear(config_.point_dim, d, rng);
  condition_position = normal_parameter({config_.cond_tokens, d}, rng, kInitStd);
  target_in = Linear(config_.point_dim, d, rng);
  target_position = normal_parameter({config_.target_tokens, d}, rng, kInitStd);
  time_in = Linear(d, d, rng);

  const std::size_t first_moe = config_.blocks - config_.moe_blocks;
  const std::size_t first_matched = first_moe - config_.matched_dense_blocks;
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    FfnSlot slot;
    if (b >= first_moe) {
      MoeShape shape{d, config_.ffn_hidden, config_.experts, config_.top_k, config_.resolved_gate_hidden(),
                     config_.gate_noise};
      slot = MoELayer(shape, rng);
    } else {
      const std::size_t hidden = b >= first_matched ? config_.matched_dense_hidden : config_.ffn_hidden;
      slot = make_dense_ffn(d, hidden, rng);
    }
    blocks.emplace_back(d, std::move(slot), rng);
  }
  final_norm = LayerNorm(d);
  velocity_out = Linear(d, config_.point_dim, rng, 0.0);
  tag_embedding = TagEmbedding(tag_count, d, rng, config_.train_tag_embeddings);
  head = PredictionHead(config_.experts, config_.resolved_head_hidden(), d, rng);
}

Tensor Model::assemble_tokens(const Tensor& condition, const Tensor& zt, double t) const {
  if (condition.shape() != Shape{config_.cond_tokens, config_.point_dim} ||
      zt.shape() != Shape{config_.target_tokens, config_.point_dim}) {
    throw ConfigError("inputs " + shape_string(condition.shape()) + " / " + shape_string(zt.shape()) +
                      " do not match the configured token layout");
  }
  const Tensor time = timestep_embedding(t, config_.dim);
  const Tensor cond_tokens = add(condition_in.forward(condition), condition_position);
  const Tensor target_tokens = add(target_in.forward(zt), target_position);
  const Tensor sequence = concat_rows({cond_tokens, target_tokens, time});
  return add(sequence, time_in.forward(time));
}

ForwardResult Model::forward(const Tensor& condition, const Tensor& zt, double t, Rng* noise_rng) const {
  ForwardResult result;
  Tensor h = assemble_tokens(condition, zt, t);
  for (const auto& block : blocks) h = block.forward(h, result.record, noise_rng);
  const Tensor normed = final_norm.forward(h);
  const std::size_t begin = config_.cond_tokens;
  result.velocity = velocity_out.forward(slice_rows(normed, begin, begin + config_.target_tokens));
  return result;
}

LossResult Model::total_loss(const TrainingSample& sample, const FlowState& state, Rng* noise_rng) const {
  auto fwd = forward(sample.condition, state.zt, state.t, noise_rng);
  LossResult out;
  const Tensor lf = flow_loss(fwd.velocity, state);
  out.parts.flow = lf.item();
  Tensor total = lf;
  if (!fwd.record.empty()) {
    const Tensor lbl = load_balance_loss(fwd.record);
    out.signature = aggregate_signature(fwd.record, config_.signature_source);
    const Tensor predicted = predict_semantics(out.signature, head);
    const Tensor target = semantic_embedding(sample.tags, tag_embedding);
    const Tensor align = alignment_loss(predicted, target, !config_.train_tag_embeddings);
    out.parts.lbl = lbl.item();
    out.parts.align = align.item();
    if (config_.lambda_lbl > 0.0) total = add(total, scale(lbl, config_.lambda_lbl));
    if (config_.lambda_align > 0.0) total = add(total, scale(align, config_.lambda_align));
  }
  out.parts.total = out.parts.flow + config_.lambda_lbl * out.parts.lbl + config_.lambda_align * out.parts.align;
  out.total = total;
  out.record = std::move(fwd.record);
  return out;
}

ParameterList Model::parameters() const {
  ParameterList out;
  condition_in.collect("condition_in", out);
  out.push_back({"condition_position", condition_position});
  target_in.collect("target_in", out);
  out.push_back({"target_position", target_position});
  time_in.collect("time_in", out);
  for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b].collect("block" + std::to_string(b), out);
  final_norm.collect("final_norm", out);
  velocity_out.collect("velocity_out", out);
  tag_embedding.collect("tag_embedding", out);
  head.collect("head", out);
  return out;
}

ParameterList Model::trainable_parameters() const {
  ParameterList all = parameters();
  ParameterList out;
  for (auto& p : all) {
    if (p.tensor.requires_grad()) out.push_back(std::move(p));
  }
  return out;
}

std::size_t expected_parameter_count(const BackboneConfig& c, std::size_t tag_count) {
  const std::size_t d = c.dim;
  const auto ffn = [d](std::size_t h) { return d * h + h + h * d + d; };
  std::size_t n = 0;
  n += 2 * (c.point_dim * d + d);                  // condition_in, target_in
  n += (c.cond_tokens + c.target_tokens) * d;      // position embeddings
  n += d * d + d;                                  // time_in
  const std::size_t per_block_common = 4 * d + 4 * d * d + 3 * d;  // two norms, q/k/v/o (no key bias)
  const std::size_t g = c.resolved_gate_hidden();
  const std::size_t moe = d * g + g + g * c.experts + c.experts + c.experts * ffn(c.ffn_hidden);
  const std::size_t plain = c.blocks - c.moe_blocks - c.matched_dense_blocks;
  n += c.blocks * per_block_common;
  n += plain * ffn(c.ffn_hidden) + c.matched_dense_blocks * ffn(c.matched_dense_hidden) + c.moe_blocks * moe;
  n += 2 * d + d * c.point_dim + c.point_dim;      // final_norm, velocity_out
  n += tag_count * d;
  const std::size_t hh = c.resolved_head_hidden();
  n += c.experts * hh + hh + hh * d + d;
  return n;
}

}  // namespace tagmoe
