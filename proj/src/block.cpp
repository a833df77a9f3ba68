// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/block.hpp"

#include "tagmoe/errors.hpp"
#include "tagmoe/ops.hpp"

namespace tagmoe {

TransformerBlock::TransformerBlock(std::size_t dim, FfnSlot ffn_slot, Rng& rng)
    : norm1(dim), attention(dim, rng), norm2(dim), ffn(std::move(ffn_slot)) {}

Tensor TransformerBlock::forward(const Tensor& x, RoutingRecord& record, Rng* noise_rng) const {
  if (x.rank() != 2 || x.dim(1) != norm1.gain.dim(0)) {
    throw ShapeError("block input " + shape_string(x.shape()) + " does not match width " +
                     std::to_string(norm1.gain.dim(0)));
  }
  const Tensor h = add(x, attention.forward(norm1.forward(x)));
  const Tensor normed = norm2.forward(h);
  const Tensor f = std::visit(
      [&](const auto& slot) -> Tensor {
        if constexpr (std::is_same_v<std::decay_t<decltype(slot)>, MoELayer>) {
          return slot.forward(normed, record, noise_rng);
        } else {
          return slot.forward(normed);
        }
      },
      ffn);
  return add(h, f);
}

void TransformerBlock::collect(const std::string& prefix, ParameterList& out) const {
  norm1.collect(prefix + ".norm1", out);
  attention.collect(prefix + ".attn", out);
  norm2.collect(prefix + ".norm2", out);
  std::visit([&](const auto& slot) { slot.collect(prefix + (is_moe() ? ".moe" : ".ffn"), out); }, ffn);
}

}  // namespace tagmoe
