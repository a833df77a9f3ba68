// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tagmoe/parameters.hpp"

namespace tagmoe {

/// Result of one loss evaluation for gradient checking. `region` identifies
/// the piecewise-smooth region the evaluation landed in (for example the
/// top-k routing choices); central differences are only valid when the
/// perturbed evaluations stay in the region of the base point.
struct GradProbe {
  Tensor loss;
  std::vector<std::size_t> region;
};

struct GradCheckEntry {
  std::string name;
  std::size_t elements = 0;
  double rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  /// False when some +-h perturbation changed the region.
  bool region_stable = true;
};

/// ||a - b|| / max(||a||, ||b||, floor) over whole tensors.
double gradient_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                               double floor = 1e-6);

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences with step `h`, for every element of every listed tensor.
/// Parameter values are restored afterwards; their grads hold the analytic
/// gradient on return.
GradCheckReport check_gradients(const std::function<GradProbe()>& loss_fn, ParameterList params,
                                double h = 1e-5);

}  // namespace tagmoe
