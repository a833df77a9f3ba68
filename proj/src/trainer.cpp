// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/trainer.hpp"

#include <cmath>

#include "tagmoe/errors.hpp"
#include "tagmoe/ops.hpp"

namespace tagmoe {

Adam::Adam(ParameterList params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].tensor.mutable_data();
    const auto grad = params_[i].tensor.mutable_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
      values[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

Trainer::Trainer(Model& model, const std::vector<TrainingSample>& data, const TrainOptions& options)
    : model_(model),
      data_(data),
      options_(options),
      rng_(options.seed),
      adam_(model.trainable_parameters(), options.lr, options.beta1, options.beta2, options.adam_eps) {
  if (data_.empty()) throw ContractError("trainer needs at least one sample");
  if (options_.batch_size == 0) throw ConfigError("batch_size must be positive");
}

LossBreakdown Trainer::train_step() {
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<std::size_t> batch(options_.batch_size);
  for (auto& i : batch) i = pick(rng_);
  return train_step(batch);
}

LossBreakdown Trainer::train_step(std::span<const std::size_t> batch) {
  if (batch.empty()) throw ContractError("empty batch");
  adam_.zero_grad();
  LossBreakdown avg;
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto index : batch) {
    const TrainingSample& sample = data_.at(index);
    const double t = uniform(rng_);
    std::vector<double> noise(sample.target.numel());
    for (auto& v : noise) v = normal(rng_);
    const FlowState state = FlowState::make(sample.target, Tensor::from_data(sample.target.shape(), std::move(noise)), t);
    const LossResult loss = model_.total_loss(sample, state, model_.config().gate_noise > 0.0 ? &rng_ : nullptr);
    if (!std::isfinite(loss.parts.total)) {
      throw NumericError("non-finite loss at step " + std::to_string(step_) + " (task '" + sample.task_id +
                         "', flow=" + std::to_string(loss.parts.flow) + ")");
    }
    backward(scale(loss.total, inv));
    avg.flow += loss.parts.flow * inv;
    avg.lbl += loss.parts.lbl * inv;
    avg.align += loss.parts.align * inv;
  }
  const auto& c = model_.config();
  avg.total = avg.flow + c.lambda_lbl * avg.lbl + c.lambda_align * avg.align;
  adam_.step();
  ++step_;
  return avg;
}

FlowState eval_flow_state(const TrainingSample& sample, std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, "eval", index));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double t = uniform(rng);
  std::vector<double> noise(sample.target.numel());
  for (auto& v : noise) v = normal(rng);
  return FlowState::make(sample.target, Tensor::from_data(sample.target.shape(), std::move(noise)), t);
}

double evaluate_flow_loss(const Model& model, const std::vector<TrainingSample>& samples, std::uint64_t seed) {
  if (samples.empty()) throw ContractError("evaluate_flow_loss: no samples");
  NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const FlowState state = eval_flow_state(samples[i], seed, i);
    total += flow_loss(model.forward(samples[i].condition, state.zt, state.t).velocity, state).item();
  }
  return total / static_cast<double>(samples.size());
}

Tensor integrate_euler(const Model& model, const Tensor& condition, const Tensor& start, std::size_t steps) {
  if (steps < 1) throw ContractError("sampling needs at least one step");
  NoGradGuard no_grad;
  std::vector<double> z = start.to_vector();
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const Tensor v = model.forward(condition, Tensor::from_data(start.shape(), z), t).velocity;
    const auto vv = v.data();
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += dt * vv[j];
  }
  return Tensor::from_data(start.shape(), std::move(z));
}

Tensor sample_euler(const Model& model, const Tensor& condition, std::size_t steps, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& c = model.config();
  std::vector<double> z(c.target_tokens * c.point_dim);
  for (auto& v : z) v = normal(rng);
  return integrate_euler(model, condition, Tensor::from_data({c.target_tokens, c.point_dim}, std::move(z)), steps);
}

}  // namespace tagmoe
