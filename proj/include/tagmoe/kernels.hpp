// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

// Dense row-major GEMM kernels. Every entry point computes
//   C = A' * B'            (accumulate == false)
//   C = C + A' * B'        (accumulate == true)
// where A' / B' are the operands after the transposition named by the suffix
// (nn: A*B, nt: A*B^T, tn: A^T*B). `m`, `n`, `k` always describe the
// product shape C[m x n] with inner dimension k.
//
// `parallel` is the production path: rows of C are distributed over OpenMP
// threads and each row is reduced in a fixed order, so results do not depend
// on the thread count. `serial` is a plain triple-loop reference kept for
// tests and the benchmark; it is not bitwise equal to `parallel` because the
// reduction order differs.

namespace tagmoe::kernels {

namespace serial {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
}  // namespace serial

namespace parallel {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
}  // namespace parallel

/// Work (m*n*k) below which the parallel kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1U << 15U;

/// Number of OpenMP threads the parallel kernels may use (1 without OpenMP).
int max_threads();

}  // namespace tagmoe::kernels
