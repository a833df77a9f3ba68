// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "tagmoe/parameters.hpp"
#include "tagmoe/rng.hpp"
#include "tagmoe/tensor.hpp"

namespace tagmoe {

/// Default standard deviation for weight initialization.
inline constexpr double kInitStd = 0.02;

/// Fills a fresh trainable tensor with Normal(0, stddev) draws (zeros when
/// stddev == 0).
Tensor normal_parameter(Shape shape, Rng& rng, double stddev);

/// y = x W^T + b with W[out x in]. Accepts a matrix [m x in] or a vector [in].
class Linear {
 public:
  Linear() = default;
  /// Without `with_bias` the bias tensor stays undefined.
  Linear(std::size_t in, std::size_t out, Rng& rng, double init_std = kInitStd, bool with_bias = true);

  [[nodiscard]] Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  [[nodiscard]] std::size_t in_features() const { return weight.dim(1); }
  [[nodiscard]] std::size_t out_features() const { return weight.dim(0); }

  Tensor weight;
  Tensor bias;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim);

  [[nodiscard]] Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor gain;
  Tensor bias;
  double eps = 1e-5;
};

/// Two linear layers with SiLU in between. Serves as the dense FFN, every
/// MoE expert, the gating network and the semantic prediction head.
class Mlp {
 public:
  Mlp() = default;
  /// `zero_output` zero-initializes the second layer's weight.
  Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, bool zero_output = false);

  [[nodiscard]] Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  [[nodiscard]] std::size_t in_features() const { return fc1.in_features(); }
  [[nodiscard]] std::size_t hidden() const { return fc1.out_features(); }
  [[nodiscard]] std::size_t out_features() const { return fc2.out_features(); }

  Linear fc1;
  Linear fc2;
};

/// The feed-forward sub-layer of a transformer block: D -> hidden -> D.
using DenseFFN = Mlp;

DenseFFN make_dense_ffn(std::size_t dim, std::size_t hidden, Rng& rng);

/// Sinusoidal embedding of t: [sin(t w_0) .. sin(t w_{h-1}), cos(t w_0) .. cos(t w_{h-1})]
/// with h = dim / 2 and w_j log-spaced over [1, 1e4]. Throws ConfigError for odd dim.
Tensor timestep_embedding(double t, std::size_t dim);

/// Single-head, non-causal self-attention with output projection.
class Attention {
 public:
  Attention() = default;
  Attention(std::size_t dim, Rng& rng);

  [[nodiscard]] Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Linear query;
  Linear key;  // no bias: a key offset shifts every score of a query equally
  Linear value;
  Linear output;
};

}  // namespace tagmoe
