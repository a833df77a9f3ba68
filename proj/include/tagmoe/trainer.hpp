// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tagmoe/model.hpp"

namespace tagmoe {

struct TrainOptions {
  std::size_t steps = 4000;
  std::size_t batch_size = 16;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  Adam(ParameterList params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Applies one update from the current grads.
  void step();
  void zero_grad();
  [[nodiscard]] std::size_t steps_taken() const { return t_; }

 private:
  ParameterList params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
};

/// Single-threaded training loop. Each step draws a batch of sample indices,
/// a timestep t ~ U(0, 1) and noise z1 ~ N(0, I) per sample, then takes one
/// Adam step on the batch-averaged objective.
class Trainer {
 public:
  Trainer(Model& model, const std::vector<TrainingSample>& data, const TrainOptions& options);

  LossBreakdown train_step();
  LossBreakdown train_step(std::span<const std::size_t> batch);
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  Model& model_;
  const std::vector<TrainingSample>& data_;
  TrainOptions options_;
  Rng rng_;
  Adam adam_;
  std::size_t step_ = 0;
};

/// Draws (t, z1) for sample `index` of an evaluation pass from `seed`.
FlowState eval_flow_state(const TrainingSample& sample, std::uint64_t seed, std::size_t index);

/// Mean flow-matching loss over `samples` with seeded (t, z1); no graph.
double evaluate_flow_loss(const Model& model, const std::vector<TrainingSample>& samples, std::uint64_t seed);

/// Euler integration of the learned velocity field from z ~ N(0, I) at t = 0
/// to t = 1 in `steps` equal steps.
Tensor sample_euler(const Model& model, const Tensor& condition, std::size_t steps, std::uint64_t seed);
/// Same, from a given starting point.
Tensor integrate_euler(const Model& model, const Tensor& condition, const Tensor& start, std::size_t steps);

}  // namespace tagmoe
