// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <variant>

#include "tagmoe/moe.hpp"
#include "tagmoe/nn.hpp"

namespace tagmoe {

using FfnSlot = std::variant<DenseFFN, MoELayer>;

/// Pre-norm transformer block: h = x + attn(LN1(x)); y = h + ffn(LN2(h)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::size_t dim, FfnSlot ffn, Rng& rng);

  /// MoE slots append their gate distribution to `record`.
  [[nodiscard]] Tensor forward(const Tensor& x, RoutingRecord& record, Rng* noise_rng = nullptr) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  [[nodiscard]] bool is_moe() const { return std::holds_alternative<MoELayer>(ffn); }

  LayerNorm norm1;
  Attention attention;
  LayerNorm norm2;
  FfnSlot ffn;
};

}  // namespace tagmoe
