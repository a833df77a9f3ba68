// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/nn.hpp"

#include <cmath>

#include "tagmoe/errors.hpp"
#include "tagmoe/ops.hpp"

namespace tagmoe {

Tensor normal_parameter(Shape shape, Rng& rng, double stddev) {
  std::vector<double> data(shape_numel(shape), 0.0);
  if (stddev > 0.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : data) v = dist(rng);
  }
  return Tensor::parameter(std::move(shape), std::move(data));
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, double init_std, bool with_bias)
    : weight(normal_parameter({out, in}, rng, init_std)) {
  if (with_bias) bias = normal_parameter({out}, rng, 0.0);
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() == 1) return reshape(forward(reshape(x, {1, x.dim(0)})), {out_features()});
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    throw ShapeError("Linear: input " + shape_string(x.shape()) + " does not match weight " +
                     shape_string(weight.shape()));
  }
  const Tensor y = matmul_nt(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t dim)
    : gain(Tensor::parameter({dim}, std::vector<double>(dim, 1.0))),
      bias(Tensor::parameter({dim}, std::vector<double>(dim, 0.0))) {}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

Mlp::Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, bool zero_output)
    : fc1(in, hidden, rng), fc2(hidden, out, rng, zero_output ? 0.0 : kInitStd) {}

Tensor Mlp::forward(const Tensor& x) const { return fc2.forward(silu(fc1.forward(x))); }

void Mlp::collect(const std::string& prefix, ParameterList& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

DenseFFN make_dense_ffn(std::size_t dim, std::size_t hidden, Rng& rng) {
  return Mlp(dim, hidden, dim, rng, /*zero_output=*/true);
}

Tensor timestep_embedding(double t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("timestep embedding width must be even and positive, got " + std::to_string(dim));
  }
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t j = 0; j < half; ++j) {
    const double exponent = half > 1 ? 4.0 * static_cast<double>(j) / static_cast<double>(half - 1) : 0.0;
    const double freq = std::pow(10.0, exponent);
    out[j] = std::sin(t * freq);
    out[half + j] = std::cos(t * freq);
  }
  return Tensor::from_data({dim}, std::move(out));
}

Attention::Attention(std::size_t dim, Rng& rng)
    : query(dim, dim, rng), key(dim, dim, rng, kInitStd, false), value(dim, dim, rng), output(dim, dim, rng, 0.0) {}

Tensor Attention::forward(const Tensor& x) const {
  const auto q = query.forward(x);
  const auto k = key.forward(x);
  const auto v = value.forward(x);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.dim(1)));
  const auto weights = softmax(scale(matmul_nt(q, k), inv_sqrt_d), 1);
  return output.forward(matmul(weights, v));
}

void Attention::collect(const std::string& prefix, ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

}  // namespace tagmoe
