// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <doctest.h>

#include "helpers.hpp"
#include "tagmoe/block.hpp"
#include "tagmoe/errors.hpp"
#include "tagmoe/nn.hpp"

using namespace tagmoe;
using testing::fd_max_rel_error;
using testing::project;
using testing::random_tensor;

namespace {

// Redraws every tensor so zero-initialized projections do not hide paths.
void randomize(const ParameterList& params, Rng& rng, double sd = 0.3) {
  for (auto p : params) {
    auto values = testing::normal_values(p.tensor.numel(), rng, sd);
    std::copy(values.begin(), values.end(), p.tensor.mutable_data().begin());
  }
}

ParameterList tensors_of(const TransformerBlock& block) {
  ParameterList out;
  block.collect("b", out);
  return out;
}

std::vector<Tensor> as_tensors(const ParameterList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("linear layer shapes, 1-D input and zero bias init") {
    Rng rng(1);
    const Linear lin(3, 5, rng);
    CHECK(lin.weight.shape() == Shape{5, 3});
    CHECK(lin.bias.shape() == Shape{5});
    for (const double b : lin.bias.data()) CHECK(b == 0.0);
    const auto x = random_tensor({4, 3}, rng);
    CHECK(lin.forward(x).shape() == Shape{4, 5});
    const auto v = random_tensor({3}, rng);
    const auto y = lin.forward(v);
    CHECK(y.shape() == Shape{5});
    for (std::size_t o = 0; o < 5; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 3; ++i) acc += lin.weight.at(o, i) * v.at(i);
      CHECK(y.at(o) == doctest::Approx(acc).epsilon(1e-14));
    }
    CHECK_THROWS_AS((void)lin.forward(random_tensor({2, 4}, rng)), ShapeError);
  }

  TEST_CASE("parameter init draws are centred at std 0.02") {
    Rng rng(2);
    const auto w = normal_parameter({200, 200}, rng, kInitStd);
    const auto d = w.data();
    const double m = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double v = 0.0;
    for (const double x : d) v += (x - m) * (x - m);
    v /= static_cast<double>(d.size());
    CHECK(std::abs(m) < 1e-3);
    CHECK(std::sqrt(v) == doctest::Approx(0.02).epsilon(0.02));
  }

  TEST_CASE("timestep embedding at t = 0") {
    const auto e = timestep_embedding(0.0, 8);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(e.at(j) == 0.0);
      CHECK(e.at(4 + j) == 1.0);
    }
  }

  TEST_CASE("timestep embedding matches a scalar recomputation") {
    const std::size_t dim = 4;
    const double t = 0.5;
    const auto e = timestep_embedding(t, dim);
    const std::size_t half = dim / 2;
    for (std::size_t j = 0; j < half; ++j) {
      const double omega = std::pow(1e4, static_cast<double>(j) / static_cast<double>(half - 1));
      CHECK(e.at(j) == doctest::Approx(std::sin(t * omega)).epsilon(1e-15));
      CHECK(e.at(half + j) == doctest::Approx(std::cos(t * omega)).epsilon(1e-15));
    }
    CHECK(e.at(0) == doctest::Approx(std::sin(0.5)).epsilon(1e-15));
    CHECK(e.at(1) == doctest::Approx(std::sin(5000.0)).epsilon(1e-12));
  }

  TEST_CASE("timestep embedding separates timesteps and rejects odd widths") {
    const auto a = timestep_embedding(0.1, 16);
    const auto b = timestep_embedding(0.9, 16);
    double dist = 0.0;
    for (std::size_t i = 0; i < 16; ++i) dist += (a.at(i) - b.at(i)) * (a.at(i) - b.at(i));
    CHECK(dist > 0.0);
    CHECK_THROWS_AS((void)timestep_embedding(0.3, 7), ConfigError);
  }

  TEST_CASE("attention over one token is O(V(x))") {
    Rng rng(3);
    Attention attn(6, rng);
    ParameterList params;
    attn.collect("a", params);
    randomize(params, rng);
    const auto x = random_tensor({1, 6}, rng);
    const auto got = attn.forward(x);
    const auto want = attn.output.forward(attn.value.forward(x));
    for (std::size_t i = 0; i < 6; ++i) CHECK(got.at(i) == doctest::Approx(want.at(i)).epsilon(1e-14));
  }

  TEST_CASE("attention is permutation equivariant") {
    Rng rng(4);
    Attention attn(5, rng);
    ParameterList params;
    attn.collect("a", params);
    randomize(params, rng);
    const auto x = random_tensor({4, 5}, rng);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    const auto y = attn.forward(x);
    const auto yp = attn.forward(gather_rows(x, perm));
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 5; ++c) CHECK(yp.at(r, c) == doctest::Approx(y.at(perm[r], c)).epsilon(1e-12));
    }
  }

  TEST_CASE("attention gradient on a 3x8 input") {
    Rng rng(5);
    Attention attn(8, rng);
    ParameterList params;
    attn.collect("a", params);
    randomize(params, rng);
    auto x = testing::random_param({3, 8}, rng);
    const auto w = random_tensor({3, 8}, rng);
    auto tensors = as_tensors(params);
    tensors.push_back(x);
    CHECK(fd_max_rel_error([&] { return project(attn.forward(x), w); }, tensors) < 1e-5);
  }

  TEST_CASE("freshly initialized block is the identity") {
    Rng rng(6);
    const TransformerBlock block(8, make_dense_ffn(8, 16, rng), rng);
    const auto x = random_tensor({5, 8}, rng);
    RoutingRecord record;
    CHECK(block.forward(x, record).to_vector() == x.to_vector());
    CHECK(record.empty());
  }

  TEST_CASE("dense slot and single-expert MoE slot give identical blocks") {
    Rng rng(7);
    TransformerBlock dense(8, make_dense_ffn(8, 16, rng), rng);
    randomize(tensors_of(dense), rng);
    MoELayer moe(MoeShape{8, 16, 1, 1}, rng);
    moe.experts[0] = std::get<DenseFFN>(dense.ffn);
    randomize([&] {
      ParameterList g;
      moe.gate.collect("g", g);
      return g;
    }(), rng);
    TransformerBlock routed = dense;
    routed.ffn = moe;
    CHECK(routed.is_moe());
    const auto x = random_tensor({6, 8}, rng);
    RoutingRecord r1;
    RoutingRecord r2;
    const auto a = dense.forward(x, r1);
    const auto b = routed.forward(x, r2);
    CHECK(a.shape() == b.shape());
    CHECK(a.to_vector() == b.to_vector());
    CHECK(r2.layers() == 1);
  }

  TEST_CASE("block gradient through dense and MoE slots") {
    for (const bool use_moe : {false, true}) {
      CAPTURE(use_moe);
      Rng rng(8);
      FfnSlot slot = make_dense_ffn(6, 12, rng);
      if (use_moe) slot = MoELayer(MoeShape{6, 12, 3, 2}, rng);
      TransformerBlock block(6, slot, rng);
      const auto params = tensors_of(block);
      randomize(params, rng);
      auto x = testing::random_param({4, 6}, rng);
      const auto w = random_tensor({4, 6}, rng);
      auto tensors = as_tensors(params);
      tensors.push_back(x);
      RoutingRecord base;
      (void)block.forward(x, base);
      const auto loss = [&] {
        RoutingRecord r;
        auto out = project(block.forward(x, r), w);
        if (use_moe) CHECK(r.routing_key() == base.routing_key());
        return out;
      };
      CHECK(fd_max_rel_error(loss, tensors) < 1e-4);
    }
  }
}
