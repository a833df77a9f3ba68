// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tagmoe/tensor.hpp"

namespace tagmoe {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered list of named tensors. The order is part of the checkpoint format.
using ParameterList = std::vector<NamedTensor>;

inline std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

inline void zero_grads(ParameterList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace tagmoe
