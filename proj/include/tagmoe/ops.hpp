// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tagmoe/tensor.hpp"

// Differentiable tensor operations. All functions build graph nodes when
// recording is enabled. Broadcasting is limited to the second operand of the
// binary ops: it may match the first exactly, be a single element, or be a
// vector matching the last axis of a matrix (row broadcast).

namespace tagmoe {

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T for a[m x k], b[n x k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor silu(const Tensor& x);
Tensor square(const Tensor& x);

/// Sum of all elements, as a rank-0 tensor.
Tensor sum(const Tensor& x);
/// Sum over one axis (axis removed from the shape).
Tensor sum(const Tensor& x, std::size_t axis);
/// Mean over all elements.
Tensor mean(const Tensor& x);
/// Mean over the listed axes (removed from the shape).
Tensor mean(const Tensor& x, std::vector<std::size_t> axes);

/// Max-subtracted softmax along `axis`. NaN input raises NumericError.
Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes over the last axis, then applies gain and bias (both [last]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Indices of the k largest entries of every row (last axis), in descending
/// value order; ties go to the lowest index. Not differentiable.
std::vector<std::vector<std::size_t>> topk_indices(const Tensor& x, std::size_t k);

/// Rows `rows` of a matrix, in the listed order.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
/// Inverse of gather_rows: a [row_count x n] matrix holding src row i at
/// `rows[i]`, zeros elsewhere (repeated targets accumulate).
Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> rows, std::size_t row_count);
/// Vector of x[rows[i], cols[i]].
Tensor gather_elements(const Tensor& x, std::span<const std::size_t> rows,
                       std::span<const std::size_t> cols);
/// Multiplies row i of x[m x n] by w[i].
Tensor scale_rows(const Tensor& x, const Tensor& w);

/// Stacks matrices (or vectors, as single rows) with equal column counts.
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

/// a.b / max(|a||b|, eps), clamped to [-1, 1] against rounding.
Tensor cosine_similarity(const Tensor& a, const Tensor& b, double eps = 1e-8);

}  // namespace tagmoe
