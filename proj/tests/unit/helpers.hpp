// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tagmoe/ops.hpp"
#include "tagmoe/rng.hpp"
#include "tagmoe/tensor.hpp"

namespace testing {

using tagmoe::Rng;
using tagmoe::Shape;
using tagmoe::Tensor;

inline std::vector<double> normal_values(std::size_t n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Tensor random_param(Shape shape, Rng& rng, double sd = 1.0) {
  const auto n = tagmoe::shape_numel(shape);
  return Tensor::parameter(std::move(shape), normal_values(n, rng, sd));
}

inline Tensor random_tensor(Shape shape, Rng& rng, double sd = 1.0) {
  const auto n = tagmoe::shape_numel(shape);
  return Tensor::from_data(std::move(shape), normal_values(n, rng, sd));
}

// Central differences for every element of every tensor, compared to the
// reverse-mode gradient. Returns the worst per-tensor normwise relative error.
inline double fd_max_rel_error(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                               double h = 1e-5) {
  for (auto& p : params) p.zero_grad();
  tagmoe::backward(loss_fn());
  double worst = 0.0;
  for (auto& p : params) {
    const auto g = p.grad();
    std::vector<double> analytic(g.begin(), g.end());
    if (analytic.empty()) analytic.assign(p.numel(), 0.0);
    std::vector<double> numeric(p.numel());
    for (std::size_t i = 0; i < p.numel(); ++i) {
      tagmoe::NoGradGuard guard;
      const double saved = p.mutable_data()[i];
      p.mutable_data()[i] = saved + h;
      const double up = loss_fn().item();
      p.mutable_data()[i] = saved - h;
      const double down = loss_fn().item();
      p.mutable_data()[i] = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0;
    double na = 0.0;
    double nn = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

// sum(y * w) for a fixed w, so every output element reaches the checked loss.
inline Tensor project(const Tensor& y, const Tensor& w) { return tagmoe::sum(tagmoe::mul(y, w)); }

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tagmoe_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
