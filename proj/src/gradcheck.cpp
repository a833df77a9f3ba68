// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tagmoe/errors.hpp"

namespace tagmoe {

double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                               double floor) {
  if (analytic.size() != numeric.size()) throw ShapeError("gradient_relative_error: size mismatch");
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
}

GradCheckReport check_gradients(const std::function<GradProbe()>& loss_fn, ParameterList params,
                                double h) {
  for (auto& p : params) {
    if (!p.tensor.requires_grad()) {
      throw ContractError("check_gradients: '" + p.name + "' does not require grad");
    }
    p.tensor.zero_grad();
  }
  const GradProbe base = loss_fn();
  backward(base.loss);

  GradCheckReport report;
  NoGradGuard no_grad;
  for (auto& p : params) {
    auto values = p.tensor.mutable_data();
    const auto analytic = p.tensor.grad();
    std::vector<double> numeric(values.size());
    double max_abs = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const GradProbe plus = loss_fn();
      values[i] = saved - h;
      const GradProbe minus = loss_fn();
      values[i] = saved;
      if (plus.region != base.region || minus.region != base.region) report.region_stable = false;
      numeric[i] = (plus.loss.item() - minus.loss.item()) / (2.0 * h);
      max_abs = std::max(max_abs, std::abs(numeric[i] - analytic[i]));
    }
    GradCheckEntry entry{p.name, values.size(), gradient_relative_error(analytic, numeric), max_abs};
    report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace tagmoe
