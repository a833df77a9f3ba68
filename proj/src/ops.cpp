// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tagmoe/errors.hpp"
#include "tagmoe/kernels.hpp"

namespace tagmoe {

namespace {

using detail::Node;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_string(t.shape()));
  }
}

enum class Broadcast { kSame, kScalar, kRow };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kScalar;
  if (a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1)) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(b.shape()) + " onto " +
                   shape_string(a.shape()));
}

std::size_t b_index(Broadcast kind, std::size_t i, std::size_t bn) {
  switch (kind) {
    case Broadcast::kSame: return i;
    case Broadcast::kScalar: return 0;
    case Broadcast::kRow: return i % bn;
  }
  return 0;
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename F>
Tensor unary(const Tensor& x, F&& f, detail::BackwardFn bw) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, std::move(bw));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  std::vector<double> out(m * n);
  kernels::parallel::gemm_nn(m, n, k, a.data(), b.data(), out, false);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.requires_grad) kernels::parallel::gemm_nt(m, k, n, self.grad, nb.value, na.grad, true);
    if (nb.requires_grad) kernels::parallel::gemm_tn(k, n, m, na.value, self.grad, nb.grad, true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: inner dimensions differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + "^T");
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(0);
  std::vector<double> out(m * n);
  kernels::parallel::gemm_nt(m, n, k, a.data(), b.data(), out, false);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.requires_grad) kernels::parallel::gemm_nn(m, k, n, self.grad, nb.value, na.grad, true);
    if (nb.requires_grad) kernels::parallel::gemm_tn(n, k, m, self.grad, na.value, nb.grad, true);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind(a, b, "add");
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t bn = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[b_index(kind, i, bn)];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [kind, bn](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += g[i];
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) nb.grad[b_index(kind, i, bn)] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind(a, b, "sub");
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t bn = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[b_index(kind, i, bn)];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [kind, bn](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += g[i];
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) nb.grad[b_index(kind, i, bn)] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind(a, b, "mul");
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t bn = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[b_index(kind, i, bn)];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [kind, bn](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    if (na.requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += g[i] * nb.value[b_index(kind, i, bn)];
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) nb.grad[b_index(kind, i, bn)] += g[i] * na.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; }, [factor](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i] * factor;
  });
}

Tensor silu(const Tensor& x) {
  return unary(x, [](double v) { return v / (1.0 + std::exp(-v)); }, [](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = nx.value[i];
      const double s = 1.0 / (1.0 + std::exp(-v));
      nx.grad[i] += self.grad[i] * s * (1.0 + v * (1.0 - s));
    }
  });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += 2.0 * nx.value[i] * self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  const auto v = x.data();
  double acc = 0.0;
  for (const double e : v) acc += e;
  return Tensor::make_result({}, {acc}, {x}, [](Node& self) {
    Node& nx = *self.inputs[0];
    const double g = self.grad[0];
    for (auto& e : nx.grad) e += g;
  });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto v = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = v.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {x}, [s](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        double* dst = nx.grad.data() + (o * s.extent + e) * s.inner;
        const double* g = self.grad.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i];
      }
    }
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, std::vector<std::size_t> axes) {
  if (axes.empty()) return mean(x);
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  std::size_t count = 1;
  for (const auto a : axes) count *= x.dim(a);
  if (count == 0) throw ShapeError("mean over an empty axis");
  Tensor r = x;
  for (auto it = axes.rbegin(); it != axes.rend(); ++it) r = sum(r, *it);
  return scale(r, 1.0 / static_cast<double>(count));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  const auto v = x.data();
  for (const double e : v) {
    if (!std::isfinite(e)) throw NumericError("softmax: non-finite input");
  }
  std::vector<double> out(v.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = v[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, v[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double ex = std::exp(v[base + e * s.inner] - mx);
        out[base + e * s.inner] = ex;
        z += ex;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= z;
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    Node& nx = *self.inputs[0];
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) dot += y[base + e * s.inner] * g[base + e * s.inner];
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t j = base + e * s.inner;
          nx.grad[j] += y[j] * (g[j] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm of a scalar");
  const std::size_t n = x.dim(x.rank() - 1);
  if (gain.shape() != Shape{n} || bias.shape() != Shape{n}) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(n) + "], got " +
                     shape_string(gain.shape()) + " and " + shape_string(bias.shape()));
  }
  const std::size_t rows = x.numel() / n;
  const auto v = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  std::vector<double> xhat(v.size());
  std::vector<double> rstd(rows);
  std::vector<double> out(v.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu *= inv_n;
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var *= inv_n;
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * rstd[r];
      xhat[r * n + j] = h;
      out[r * n + j] = h * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [n, rows, inv_n, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ng = *self.inputs[1];
        Node& nb = *self.inputs[2];
        const auto& g = self.grad;
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t off = r * n;
          if (ng.requires_grad) {
            for (std::size_t j = 0; j < n; ++j) ng.grad[j] += g[off + j] * xhat[off + j];
          }
          if (nb.requires_grad) {
            for (std::size_t j = 0; j < n; ++j) nb.grad[j] += g[off + j];
          }
          if (nx.requires_grad) {
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = g[off + j] * ng.value[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[off + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              nx.grad[off + j] += rstd[r] * (dxhat[j] - mean_d - xhat[off + j] * mean_dx);
            }
          }
        }
      });
}

std::vector<std::vector<std::size_t>> topk_indices(const Tensor& x, std::size_t k) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("topk_indices: expected a vector or matrix, got " + shape_string(x.shape()));
  }
  const std::size_t n = x.dim(x.rank() - 1);
  const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  if (k < 1 || k > n) {
    throw ContractError("topk_indices: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  const auto v = x.data();
  std::vector<std::vector<std::size_t>> result(rows);
  std::vector<std::size_t> idx(n);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * n;
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [row](std::size_t lhs, std::size_t rhs) {
                        if (row[lhs] != row[rhs]) return row[lhs] > row[rhs];
                        return lhs < rhs;
                      });
    result[r].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return result;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  for (const auto r : rows) {
    if (r >= m) throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range");
  }
  const auto v = x.data();
  std::vector<double> out(rows.size() * n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(v.data() + rows[i] * n, n, out.data() + i * n);
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return Tensor::make_result({rows.size(), n}, std::move(out), {x},
                             [n, saved = std::move(saved)](Node& self) {
                               Node& nx = *self.inputs[0];
                               for (std::size_t i = 0; i < saved.size(); ++i) {
                                 const double* g = self.grad.data() + i * n;
                                 double* dst = nx.grad.data() + saved[i] * n;
                                 for (std::size_t j = 0; j < n; ++j) dst[j] += g[j];
                               }
                             });
}

Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> rows, std::size_t row_count) {
  require_matrix(src, "scatter_rows");
  if (src.dim(0) != rows.size()) throw ShapeError("scatter_rows: one target row per source row required");
  const std::size_t n = src.dim(1);
  for (const auto r : rows) {
    if (r >= row_count) throw ShapeError("scatter_rows: row " + std::to_string(r) + " out of range");
  }
  const auto v = src.data();
  std::vector<double> out(row_count * n, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* s = v.data() + i * n;
    double* dst = out.data() + rows[i] * n;
    for (std::size_t j = 0; j < n; ++j) dst[j] += s[j];
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return Tensor::make_result({row_count, n}, std::move(out), {src},
                             [n, saved = std::move(saved)](Node& self) {
                               Node& ns = *self.inputs[0];
                               for (std::size_t i = 0; i < saved.size(); ++i) {
                                 const double* g = self.grad.data() + saved[i] * n;
                                 double* dst = ns.grad.data() + i * n;
                                 for (std::size_t j = 0; j < n; ++j) dst[j] += g[j];
                               }
                             });
}

Tensor gather_elements(const Tensor& x, std::span<const std::size_t> rows,
                       std::span<const std::size_t> cols) {
  require_matrix(x, "gather_elements");
  if (rows.size() != cols.size()) throw ShapeError("gather_elements: rows/cols length mismatch");
  const std::size_t n = x.dim(1);
  std::vector<std::size_t> flat(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0) || cols[i] >= n) throw ShapeError("gather_elements: index out of range");
    flat[i] = rows[i] * n + cols[i];
  }
  const auto v = x.data();
  std::vector<double> out(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) out[i] = v[flat[i]];
  return Tensor::make_result({flat.size()}, std::move(out), {x}, [flat](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t i = 0; i < flat.size(); ++i) nx.grad[flat[i]] += self.grad[i];
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  require_matrix(x, "scale_rows");
  if (w.shape() != Shape{x.dim(0)}) {
    throw ShapeError("scale_rows: weights " + shape_string(w.shape()) + " do not match rows of " +
                     shape_string(x.shape()));
  }
  const std::size_t m = x.dim(0);
  const std::size_t n = x.dim(1);
  const auto xv = x.data();
  const auto wv = w.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * wv[i];
  }
  return Tensor::make_result({m, n}, std::move(out), {x, w}, [m, n](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    for (std::size_t i = 0; i < m; ++i) {
      const double* g = self.grad.data() + i * n;
      if (nx.requires_grad) {
        for (std::size_t j = 0; j < n; ++j) nx.grad[i * n + j] += g[j] * nw.value[i];
      }
      if (nw.requires_grad) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += g[j] * nx.value[i * n + j];
        nw.grad[i] += acc;
      }
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  const auto cols_of = [](const Tensor& t) { return t.rank() == 1 ? t.dim(0) : t.dim(1); };
  const auto rows_of = [](const Tensor& t) { return t.rank() == 1 ? std::size_t{1} : t.dim(0); };
  const std::size_t n = cols_of(parts.front());
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if ((p.rank() != 1 && p.rank() != 2) || cols_of(p) != n) {
      throw ShapeError("concat_rows: incompatible part " + shape_string(p.shape()));
    }
    offsets.push_back(total);
    total += rows_of(p);
  }
  std::vector<double> out(total * n);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto v = parts[i].data();
    std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(offsets[i] * n));
  }
  return Tensor::make_result({total, n}, std::move(out), parts, [n, offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& np = *self.inputs[i];
      if (!np.requires_grad) continue;
      const double* g = self.grad.data() + offsets[i] * n;
      for (std::size_t j = 0; j < np.grad.size(); ++j) np.grad[j] += g[j];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  if (begin > end || end > x.dim(0)) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_string(x.shape()));
  }
  const std::size_t n = x.dim(1);
  const auto v = x.data();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          v.begin() + static_cast<std::ptrdiff_t>(end * n));
  return Tensor::make_result({end - begin, n}, std::move(out), {x}, [begin, n](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t j = 0; j < self.grad.size(); ++j) nx.grad[begin * n + j] += self.grad[j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  return Tensor::make_result(std::move(shape), x.to_vector(), {x}, [](Node& self) {
    Node& nx = *self.inputs[0];
    for (std::size_t j = 0; j < self.grad.size(); ++j) nx.grad[j] += self.grad[j];
  });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b, double eps) {
  if (a.rank() != 1 || a.shape() != b.shape()) {
    throw ShapeError("cosine_similarity: expected equal vectors, got " + shape_string(a.shape()) +
                     " and " + shape_string(b.shape()));
  }
  const auto av = a.data();
  const auto bv = b.data();
  double dot = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    aa += av[i] * av[i];
    bb += bv[i] * bv[i];
  }
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  const bool guarded = na * nb <= eps;
  const double denom = guarded ? eps : na * nb;
  const double raw = dot / denom;
  const double value = std::clamp(raw, -1.0, 1.0);
  return Tensor::make_result({}, {value}, {a, b}, [guarded, denom, raw, aa, bb](Node& self) {
    Node& na_ = *self.inputs[0];
    Node& nb_ = *self.inputs[1];
    const double g = self.grad[0];
    const std::size_t d = na_.value.size();
    if (na_.requires_grad) {
      for (std::size_t i = 0; i < d; ++i) {
        double di = nb_.value[i] / denom;
        if (!guarded) di -= raw * na_.value[i] / aa;
        na_.grad[i] += g * di;
      }
    }
    if (nb_.requires_grad) {
      for (std::size_t i = 0; i < d; ++i) {
        double di = na_.value[i] / denom;
        if (!guarded) di -= raw * nb_.value[i] / bb;
        nb_.grad[i] += g * di;
      }
    }
  });
}

}  // namespace tagmoe
