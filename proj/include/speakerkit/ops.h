// speakerkit/ops.h

// Copyright 2026  Speakerkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Differentiable operations over Tensor<T>.  Forward values are computed by
// the kernels in kernels.h; each op records a closure that accumulates input
// gradients when backward() reaches it.

#ifndef SPEAKERKIT_OPS_H_
#define SPEAKERKIT_OPS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "speakerkit/common.h"
#include "speakerkit/errors.h"
#include "speakerkit/kernels.h"
#include "speakerkit/tensor.h"

namespace speakerkit {
namespace ops {

using std::int64_t;

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
  }
}

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = a.data()[i] + b.data()[i];
  Tensor<T> r = Tensor<T>::from(a.shape(), std::move(out));
  if (Tensor<T>::recording({&a, &b})) {
    r.attach_backward({a, b}, [a, b](const std::vector<T>& g,
                                     typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (T* gb = sink.grad_for(b))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
  }
  return r;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor<T> r = Tensor<T>::from(a.shape(), std::move(out));
  if (Tensor<T>::recording({&a, &b})) {
    r.attach_backward({a, b}, [a, b](const std::vector<T>& g,
                                     typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
      if (T* gb = sink.grad_for(b))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
    });
  }
  return r;
}

// Multiplication by a plain constant.
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = a.data()[i] * c;
  Tensor<T> r = Tensor<T>::from(a.shape(), std::move(out));
  if (Tensor<T>::recording({&a})) {
    r.attach_backward({a}, [a, c](const std::vector<T>& g,
                                  typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }
  return r;
}

// a / s with s a single-element tensor (broadcast).
template <typename T>
Tensor<T> div_scalar(const Tensor<T>& a, const Tensor<T>& s) {
  if (s.numel() != 1) {
    throw DimensionError("div_scalar: divisor must be scalar, got " +
                         shape_str(s.shape()));
  }
  const T sv = s.data()[0];
  const auto n = a.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = a.data()[i] / sv;
  Tensor<T> r = Tensor<T>::from(a.shape(), std::move(out));
  if (Tensor<T>::recording({&a, &s})) {
    r.attach_backward({a, s}, [a, s](const std::vector<T>& g,
                                     typename Tensor<T>::GradSink& sink) {
      const T sv2 = s.data()[0];
      if (T* ga = sink.grad_for(a))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / sv2;
      if (T* gs = sink.grad_for(s)) {
        T acc = T(0);
        for (std::size_t i = 0; i < g.size(); ++i)
          acc += g[i] * a.data()[i];
        gs[0] += -acc / (sv2 * sv2);
      }
    });
  }
  return r;
}

// X[B,F] + row vector v[F] broadcast over rows.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  if (x.ndim() != 2 || v.ndim() != 1 || x.dim(1) != v.dim(0)) {
    throw DimensionError("add_rowvec: shapes " + shape_str(x.shape()) +
                         " and " + shape_str(v.shape()) + " incompatible");
  }
  const int64_t b = x.dim(0), f = x.dim(1);
  std::vector<T> out(static_cast<std::size_t>(b * f));
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < f; ++j)
      out[i * f + j] = x.data()[i * f + j] + v.data()[j];
  Tensor<T> r = Tensor<T>::from(x.shape(), std::move(out));
  if (Tensor<T>::recording({&x, &v})) {
    r.attach_backward({x, v}, [x, v, b, f](const std::vector<T>& g,
                                           typename Tensor<T>::GradSink& sink) {
      if (T* gx = sink.grad_for(x))
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      if (T* gv = sink.grad_for(v))
        for (int64_t i = 0; i < b; ++i)
          for (int64_t j = 0; j < f; ++j) gv[j] += g[i * f + j];
    });
  }
  return r;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (const T v : a.data()) acc += v;
  Tensor<T> r = Tensor<T>::scalar(acc);
  if (Tensor<T>::recording({&a})) {
    r.attach_backward({a}, [a](const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a)) {
        const auto n = a.numel();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[0];
      }
    });
  }
  return r;
}

template <typename T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.dim(0) != b.dim(0)) {
    throw DimensionError("dot: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " incompatible");
  }
  T acc = T(0);
  const auto n = a.numel();
  for (int64_t i = 0; i < n; ++i) acc += a.data()[i] * b.data()[i];
  Tensor<T> r = Tensor<T>::scalar(acc);
  if (Tensor<T>::recording({&a, &b})) {
    r.attach_backward({a, b}, [a, b](const std::vector<T>& g,
                                     typename Tensor<T>::GradSink& sink) {
      const auto m = a.numel();
      if (T* ga = sink.grad_for(a))
        for (int64_t i = 0; i < m; ++i) ga[i] += g[0] * b.data()[i];
      if (T* gb = sink.grad_for(b))
        for (int64_t i = 0; i < m; ++i) gb[i] += g[0] * a.data()[i];
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " do not chain");
  }
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> r = Tensor<T>::zeros({m, n});
  kernels::matmul_nn_acc(a.data().data(), b.data().data(), r.data().data(), m,
                         k, n);
  if (Tensor<T>::recording({&a, &b})) {
    r.attach_backward({a, b}, [a, b, m, k, n](
                                  const std::vector<T>& g,
                                  typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a))
        kernels::matmul_nt_acc(g.data(), b.data().data(), ga, m, n, k);
      if (T* gb = sink.grad_for(b))
        kernels::matmul_tn_acc(a.data().data(), g.data(), gb, m, k, n);
    });
  }
  return r;
}

template <typename T>
Tensor<T> matvec(const Tensor<T>& a, const Tensor<T>& x) {
  if (a.ndim() != 2 || x.ndim() != 1 || a.dim(1) != x.dim(0)) {
    throw DimensionError("matvec: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(x.shape()) + " do not chain");
  }
  const int64_t m = a.dim(0), n = a.dim(1);
  std::vector<T> out(static_cast<std::size_t>(m), T(0));
  for (int64_t i = 0; i < m; ++i) {
    const T* row = a.data().data() + i * n;
    T acc = T(0);
    for (int64_t j = 0; j < n; ++j) acc += row[j] * x.data()[j];
    out[i] = acc;
  }
  Tensor<T> r = Tensor<T>::from({m}, std::move(out));
  if (Tensor<T>::recording({&a, &x})) {
    r.attach_backward({a, x}, [a, x, m, n](const std::vector<T>& g,
                                           typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a))
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) ga[i * n + j] += g[i] * x.data()[j];
      if (T* gx = sink.grad_for(x))
        for (int64_t i = 0; i < m; ++i) {
          const T* row = a.data().data() + i * n;
          for (int64_t j = 0; j < n; ++j) gx[j] += g[i] * row[j];
        }
    });
  }
  return r;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.ndim() != 2) {
    throw DimensionError("transpose: expected 2-d, got " +
                         shape_str(a.shape()));
  }
  const int64_t m = a.dim(0), n = a.dim(1);
  std::vector<T> out(static_cast<std::size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  Tensor<T> r = Tensor<T>::from({n, m}, std::move(out));
  if (Tensor<T>::recording({&a})) {
    r.attach_backward({a}, [a, m, n](const std::vector<T>& g,
                                     typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a))
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  }
  Tensor<T> r = Tensor<T>::from(std::move(shape), a.data());
  if (Tensor<T>::recording({&a})) {
    r.attach_backward({a}, [a](const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      if (T* ga = sink.grad_for(a))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return r;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& a) {
  return reshape(a, Shape{a.numel()});
}

// Columns [c0, c1) of a 2-d tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int64_t c0, int64_t c1) {
  if (x.ndim() != 2) {
    throw DimensionError("slice_cols: expected 2-d, got " +
                         shape_str(x.shape()));
  }
  const int64_t rows = x.dim(0), cols = x.dim(1);
  if (c0 < 0 || c1 > cols || c0 >= c1) {
    throw IndexError("slice_cols: range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") invalid for " +
                     shape_str(x.shape()));
  }
  const int64_t w = c1 - c0;
  std::vector<T> out(static_cast<std::size_t>(rows * w));
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < w; ++j)
      out[i * w + j] = x.data()[i * cols + c0 + j];
  Tensor<T> r = Tensor<T>::from({rows, w}, std::move(out));
  if (Tensor<T>::recording({&x})) {
    r.attach_backward({x}, [x, rows, cols, c0, w](
                               const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      if (T* gx = sink.grad_for(x))
        for (int64_t i = 0; i < rows; ++i)
          for (int64_t j = 0; j < w; ++j)
            gx[i * cols + c0 + j] += g[i * w + j];
    });
  }
  return r;
}

namespace detail {
template <typename T>
bool any_requires(const std::vector<Tensor<T>>& parts) {
  if (!grad_recording_flag()) return false;
  for (const auto& p : parts)
    if (p.requires_grad()) return true;
  return false;
}
}  // namespace detail

// K vectors of length r stacked as the columns of an [r, K] matrix.
template <typename T>
Tensor<T> stack_cols(const std::vector<Tensor<T>>& cols) {
  if (cols.empty()) throw DimensionError("stack_cols: no inputs");
  const int64_t rows = cols[0].numel();
  const int64_t k = static_cast<int64_t>(cols.size());
  for (const auto& c : cols) {
    if (c.ndim() != 1 || c.numel() != rows) {
      throw DimensionError("stack_cols: column shape " + shape_str(c.shape()) +
                           " does not match length " + std::to_string(rows));
    }
  }
  std::vector<T> out(static_cast<std::size_t>(rows * k));
  for (int64_t j = 0; j < k; ++j)
    for (int64_t i = 0; i < rows; ++i) out[i * k + j] = cols[j].data()[i];
  Tensor<T> r = Tensor<T>::from({rows, k}, std::move(out));
  if (detail::any_requires(cols)) {
    r.attach_backward(cols, [cols, rows, k](const std::vector<T>& g,
                                            typename Tensor<T>::GradSink& sink) {
      for (int64_t j = 0; j < k; ++j)
        if (T* gc = sink.grad_for(cols[j]))
          for (int64_t i = 0; i < rows; ++i) gc[i] += g[i * k + j];
    });
  }
  return r;
}

// B vectors of length f stacked as the rows of a [B, f] matrix.
template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const int64_t f = rows[0].numel();
  const int64_t b = static_cast<int64_t>(rows.size());
  for (const auto& rrow : rows) {
    if (rrow.ndim() != 1 || rrow.numel() != f) {
      throw DimensionError("stack_rows: row shape " + shape_str(rrow.shape()) +
                           " does not match length " + std::to_string(f));
    }
  }
  std::vector<T> out(static_cast<std::size_t>(b * f));
  for (int64_t i = 0; i < b; ++i)
    std::copy(rows[i].data().begin(), rows[i].data().end(),
              out.begin() + i * f);
  Tensor<T> r = Tensor<T>::from({b, f}, std::move(out));
  if (detail::any_requires(rows)) {
    r.attach_backward(rows, [rows, b, f](const std::vector<T>& g,
                                         typename Tensor<T>::GradSink& sink) {
      for (int64_t i = 0; i < b; ++i)
        if (T* gr = sink.grad_for(rows[i]))
          for (int64_t j = 0; j < f; ++j) gr[j] += g[i * f + j];
    });
  }
  return r;
}

// 1-d concatenation.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  int64_t total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 1) {
      throw DimensionError("concat: expected 1-d parts, got " +
                           shape_str(p.shape()));
    }
    total += p.numel();
  }
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(total));
  for (const auto& p : parts)
    out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor<T> r = Tensor<T>::from({total}, std::move(out));
  if (detail::any_requires(parts)) {
    r.attach_backward(parts, [parts](const std::vector<T>& g,
                                     typename Tensor<T>::GradSink& sink) {
      std::size_t off = 0;
      for (const auto& p : parts) {
        const std::size_t n = static_cast<std::size_t>(p.numel());
        if (T* gp = sink.grad_for(p))
          for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
        off += n;
      }
    });
  }
  return r;
}

// [C, H, W] -> [H, C*W]: per time step (H axis), all W values of channel 0,
// then channel 1, and so on.  This is the fixed layout used to turn the
// conv front-end output into a sequence of hidden state vectors.
template <typename T>
Tensor<T> fold_time_major(const Tensor<T>& x) {
  if (x.ndim() != 3) {
    throw DimensionError("fold_time_major: expected 3-d, got " +
                         shape_str(x.shape()));
  }
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<T> out(static_cast<std::size_t>(c * h * w));
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t t = 0; t < h; ++t)
      for (int64_t f = 0; f < w; ++f)
        out[t * (c * w) + ch * w + f] = x.data()[(ch * h + t) * w + f];
  Tensor<T> r = Tensor<T>::from({h, c * w}, std::move(out));
  if (Tensor<T>::recording({&x})) {
    r.attach_backward({x}, [x, c, h, w](const std::vector<T>& g,
                                        typename Tensor<T>::GradSink& sink) {
      if (T* gx = sink.grad_for(x))
        for (int64_t ch = 0; ch < c; ++ch)
          for (int64_t t = 0; t < h; ++t)
            for (int64_t f = 0; f < w; ++f)
              gx[(ch * h + t) * w + f] += g[t * (c * w) + ch * w + f];
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto n = x.numel();
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  Tensor<T> r = Tensor<T>::from(x.shape(), std::move(out));
  if (Tensor<T>::recording({&x})) {
    r.attach_backward({x}, [x](const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      if (T* gx = sink.grad_for(x))
        for (std::size_t i = 0; i < g.size(); ++i)
          if (x.data()[i] > T(0)) gx[i] += g[i];
    });
  }
  return r;
}

// Softmax along `axis` of a 1-d or 2-d tensor, with subtract-max
// stabilization.  axis 0 normalizes each column, axis 1 each row.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = 0) {
  if (x.ndim() == 1) {
    const int64_t n = x.numel();
    std::vector<T> out(static_cast<std::size_t>(n));
    kernels::softmax_vec(x.data().data(), out.data(), n);
    Tensor<T> r = Tensor<T>::from(x.shape(), std::move(out));
    if (Tensor<T>::recording({&x})) {
      r.attach_backward({x}, [x, r](const std::vector<T>& g,
                                    typename Tensor<T>::GradSink& sink) {
        if (T* gx = sink.grad_for(x)) {
          const auto& y = r.data();
          T dotv = T(0);
          for (std::size_t i = 0; i < g.size(); ++i) dotv += g[i] * y[i];
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] += y[i] * (g[i] - dotv);
        }
      });
    }
    return r;
  }
  if (x.ndim() != 2 || (axis != 0 && axis != 1)) {
    throw DimensionError("softmax: need 1-d input or 2-d with axis 0/1, got " +
                         shape_str(x.shape()) + " axis " +
                         std::to_string(axis));
  }
  const int64_t rows = x.dim(0), cols = x.dim(1);
  std::vector<T> out(static_cast<std::size_t>(rows * cols));
  if (axis == 1) {
    for (int64_t i = 0; i < rows; ++i)
      kernels::softmax_vec(x.data().data() + i * cols, out.data() + i * cols,
                           cols);
  } else {
    std::vector<T> col(static_cast<std::size_t>(rows));
    std::vector<T> sm(static_cast<std::size_t>(rows));
    for (int64_t j = 0; j < cols; ++j) {
      for (int64_t i = 0; i < rows; ++i) col[i] = x.data()[i * cols + j];
      kernels::softmax_vec(col.data(), sm.data(), rows);
      for (int64_t i = 0; i < rows; ++i) out[i * cols + j] = sm[i];
    }
  }
  Tensor<T> r = Tensor<T>::from(x.shape(), std::move(out));
  if (Tensor<T>::recording({&x})) {
    r.attach_backward({x}, [x, r, rows, cols, axis](
                               const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      T* gx = sink.grad_for(x);
      if (!gx) return;
      const auto& y = r.data();
      if (axis == 1) {
        for (int64_t i = 0; i < rows; ++i) {
          T dotv = T(0);
          for (int64_t j = 0; j < cols; ++j)
            dotv += g[i * cols + j] * y[i * cols + j];
          for (int64_t j = 0; j < cols; ++j)
            gx[i * cols + j] +=
                y[i * cols + j] * (g[i * cols + j] - dotv);
        }
      } else {
        for (int64_t j = 0; j < cols; ++j) {
          T dotv = T(0);
          for (int64_t i = 0; i < rows; ++i)
            dotv += g[i * cols + j] * y[i * cols + j];
          for (int64_t i = 0; i < rows; ++i)
            gx[i * cols + j] +=
                y[i * cols + j] * (g[i * cols + j] - dotv);
        }
      }
    });
  }
  return r;
}

// Inverted dropout: keeps an element with probability 1-p and rescales it by
// 1/(1-p) so the expectation is unchanged.  Identity in eval mode.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0) {
    throw ParameterError("dropout: p must be in [0,1), got " +
                         std::to_string(p));
  }
  if (!train || p == 0.0) return x;
  const auto n = x.numel();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<T> mask(static_cast<std::size_t>(n));
  const T keep_scale = T(1.0 / (1.0 - p));
  for (int64_t i = 0; i < n; ++i)
    mask[i] = unif(rng) < p ? T(0) : keep_scale;
  std::vector<T> out(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = x.data()[i] * mask[i];
  Tensor<T> r = Tensor<T>::from(x.shape(), std::move(out));
  if (Tensor<T>::recording({&x})) {
    r.attach_backward({x}, [x, mask = std::move(mask)](
                               const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      if (T* gx = sink.grad_for(x))
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Convolution and pooling
// ---------------------------------------------------------------------------

// 3x3 stride-1 same convolution of [C_in, H, W] with filters
// [C_out, C_in, 3, 3] and bias [C_out]; spatial size is preserved.
template <typename T>
Tensor<T> conv2d_same3x3(const Tensor<T>& x, const Tensor<T>& w,
                         const Tensor<T>& bias) {
  if (x.ndim() != 3) {
    throw DimensionError("conv2d_same3x3: input must be 3-d, got " +
                         shape_str(x.shape()));
  }
  if (w.ndim() != 4 || w.dim(2) != 3 || w.dim(3) != 3) {
    throw DimensionError("conv2d_same3x3: filters must be [Cout,Cin,3,3], got " +
                         shape_str(w.shape()));
  }
  if (w.dim(1) != x.dim(0)) {
    throw DimensionError("conv2d_same3x3: input channels " +
                         shape_str(x.shape()) + " do not match filters " +
                         shape_str(w.shape()));
  }
  const int64_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int64_t cout = w.dim(0);
  if (bias.ndim() != 1 || bias.dim(0) != cout) {
    throw DimensionError("conv2d_same3x3: bias shape " +
                         shape_str(bias.shape()) + " does not match " +
                         std::to_string(cout) + " filters");
  }
  Tensor<T> r = Tensor<T>::zeros({cout, h, wd});
  kernels::conv3x3_same_fwd(x.data().data(), w.data().data(),
                            bias.data().data(), r.data().data(), cin, cout, h,
                            wd);
  if (Tensor<T>::recording({&x, &w, &bias})) {
    r.attach_backward({x, w, bias}, [x, w, bias, cin, cout, h, wd](
                                        const std::vector<T>& g,
                                        typename Tensor<T>::GradSink& sink) {
      if (T* gx = sink.grad_for(x))
        kernels::conv3x3_same_bwd_input(g.data(), w.data().data(), gx, cin,
                                        cout, h, wd);
      T* gw = sink.grad_for(w);
      T* gb = sink.grad_for(bias);
      if (gw && gb) {
        kernels::conv3x3_same_bwd_filters(g.data(), x.data().data(), gw, gb,
                                          cin, cout, h, wd);
      } else if (gw || gb) {
        std::vector<T> wbuf(gw ? 0 : static_cast<std::size_t>(cout * cin * 9),
                            T(0));
        std::vector<T> bbuf(gb ? 0 : static_cast<std::size_t>(cout), T(0));
        kernels::conv3x3_same_bwd_filters(g.data(), x.data().data(),
                                          gw ? gw : wbuf.data(),
                                          gb ? gb : bbuf.data(), cin, cout, h,
                                          wd);
      }
    });
  }
  return r;
}

// 2x2 stride-2 max pooling; odd trailing rows/columns are dropped.
template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& x) {
  if (x.ndim() != 3) {
    throw DimensionError("maxpool2x2: input must be 3-d, got " +
                         shape_str(x.shape()));
  }
  const int64_t c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  if (h < 2 || wd < 2) {
    throw DimensionError("maxpool2x2: spatial dims of " + shape_str(x.shape()) +
                         " are below 2x2");
  }
  const int64_t ho = h / 2, wo = wd / 2;
  Tensor<T> r = Tensor<T>::zeros({c, ho, wo});
  std::vector<int32_t> argmax(static_cast<std::size_t>(c * ho * wo));
  kernels::maxpool2x2_fwd(x.data().data(), r.data().data(), argmax.data(), c,
                          h, wd, ho, wo);
  if (Tensor<T>::recording({&x})) {
    r.attach_backward({x}, [x, argmax = std::move(argmax), c, h, wd, ho, wo](
                               const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      if (T* gx = sink.grad_for(x))
        kernels::maxpool2x2_bwd(g.data(), argmax.data(), gx, c, h, wd, ho, wo);
    });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNormState(int64_t features = 0)
      : running_mean(static_cast<std::size_t>(features), T(0)),
        running_var(static_cast<std::size_t>(features), T(1)) {}
};

// Per-feature batch normalization of [B, F].  Train mode normalizes with
// batch statistics (population variance) and updates the running estimates;
// eval mode uses the running estimates.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma,
                    const Tensor<T>& beta, BatchNormState<T>& state,
                    bool train) {
  if (x.ndim() != 2) {
    throw DimensionError("batchnorm: input must be 2-d, got " +
                         shape_str(x.shape()));
  }
  const int64_t b = x.dim(0), f = x.dim(1);
  if (gamma.numel() != f || beta.numel() != f ||
      static_cast<int64_t>(state.running_mean.size()) != f) {
    throw DimensionError("batchnorm: parameter sizes do not match " +
                         std::to_string(f) + " features");
  }
  if (train && b < 2) {
    throw UsageError("batchnorm: train mode requires batch >= 2, got " +
                     std::to_string(b));
  }
  std::vector<T> mean(static_cast<std::size_t>(f), T(0));
  std::vector<T> var(static_cast<std::size_t>(f), T(0));
  if (train) {
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < f; ++j) mean[j] += x.data()[i * f + j];
    for (int64_t j = 0; j < f; ++j) mean[j] /= T(b);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < f; ++j) {
        const T d = x.data()[i * f + j] - mean[j];
        var[j] += d * d;
      }
    for (int64_t j = 0; j < f; ++j) var[j] /= T(b);
    for (int64_t j = 0; j < f; ++j) {
      state.running_mean[j] =
          (T(1) - state.momentum) * state.running_mean[j] +
          state.momentum * mean[j];
      state.running_var[j] = (T(1) - state.momentum) * state.running_var[j] +
                             state.momentum * var[j];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  std::vector<T> inv_std(static_cast<std::size_t>(f));
  for (int64_t j = 0; j < f; ++j)
    inv_std[j] = T(1) / std::sqrt(var[j] + state.eps);
  std::vector<T> xhat(static_cast<std::size_t>(b * f));
  std::vector<T> out(static_cast<std::size_t>(b * f));
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < f; ++j) {
      const T xh = (x.data()[i * f + j] - mean[j]) * inv_std[j];
      xhat[i * f + j] = xh;
      out[i * f + j] = gamma.data()[j] * xh + beta.data()[j];
    }
  Tensor<T> r = Tensor<T>::from(x.shape(), std::move(out));
  if (Tensor<T>::recording({&x, &gamma, &beta})) {
    r.attach_backward(
        {x, gamma, beta},
        [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std),
         b, f, train](const std::vector<T>& g,
                      typename Tensor<T>::GradSink& sink) {
          if (T* gg = sink.grad_for(gamma))
            for (int64_t i = 0; i < b; ++i)
              for (int64_t j = 0; j < f; ++j)
                gg[j] += g[i * f + j] * xhat[i * f + j];
          if (T* gb2 = sink.grad_for(beta))
            for (int64_t i = 0; i < b; ++i)
              for (int64_t j = 0; j < f; ++j) gb2[j] += g[i * f + j];
          if (T* gx = sink.grad_for(x)) {
            if (!train) {
              for (int64_t i = 0; i < b; ++i)
                for (int64_t j = 0; j < f; ++j)
                  gx[i * f + j] += g[i * f + j] * gamma.data()[j] * inv_std[j];
              return;
            }
            // Batch statistics contribute; per-feature closed form.
            for (int64_t j = 0; j < f; ++j) {
              T gsum = T(0), gxsum = T(0);
              for (int64_t i = 0; i < b; ++i) {
                gsum += g[i * f + j];
                gxsum += g[i * f + j] * xhat[i * f + j];
              }
              const T gmean = gsum / T(b);
              const T gxmean = gxsum / T(b);
              const T scale = gamma.data()[j] * inv_std[j];
              for (int64_t i = 0; i < b; ++i)
                gx[i * f + j] += scale * (g[i * f + j] - gmean -
                                          xhat[i * f + j] * gxmean);
            }
          }
        });
  }
  return r;
}

// ---------------------------------------------------------------------------
// Losses and reductions
// ---------------------------------------------------------------------------

// Mean (optionally class-weighted) negative log-softmax at the target index.
// With weights the normalizer is the sum of the selected class weights, so a
// uniform weight vector reduces exactly to plain cross-entropy.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits,
                        const std::vector<int>& targets,
                        const Tensor<T>& class_weights = Tensor<T>()) {
  if (logits.ndim() != 2) {
    throw DimensionError("cross_entropy: logits must be [B,C], got " +
                         shape_str(logits.shape()));
  }
  const int64_t b = logits.dim(0), c = logits.dim(1);
  if (static_cast<int64_t>(targets.size()) != b) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for batch " + std::to_string(b));
  }
  for (int t : targets) {
    if (t < 0 || t >= c) {
      throw IndexError("cross_entropy: target " + std::to_string(t) +
                       " outside [0," + std::to_string(c) + ")");
    }
  }
  std::vector<T> w(static_cast<std::size_t>(c), T(1));
  if (class_weights.defined()) {
    if (class_weights.ndim() != 1 || class_weights.dim(0) != c) {
      throw DimensionError("cross_entropy: weights shape " +
                           shape_str(class_weights.shape()) + " != [" +
                           std::to_string(c) + "]");
    }
    for (int64_t j = 0; j < c; ++j) {
      if (class_weights.data()[j] <= T(0)) {
        throw ParameterError("cross_entropy: class weights must be positive");
      }
      w[j] = class_weights.data()[j];
    }
  }
  // log-softmax per row, stabilized.
  std::vector<T> probs(static_cast<std::size_t>(b * c));
  T loss = T(0), wsum = T(0);
  for (int64_t i = 0; i < b; ++i) {
    const T* row = logits.data().data() + i * c;
    T mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    T sum = T(0);
    for (int64_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      sum += probs[i * c + j];
    }
    const T inv = T(1) / sum;
    for (int64_t j = 0; j < c; ++j) probs[i * c + j] *= inv;
    const T log_p = (row[targets[i]] - mx) - std::log(sum);
    loss += -w[targets[i]] * log_p;
    wsum += w[targets[i]];
  }
  loss /= wsum;
  Tensor<T> r = Tensor<T>::scalar(loss);
  if (Tensor<T>::recording({&logits})) {
    r.attach_backward({logits}, [logits, targets, w = std::move(w),
                                 probs = std::move(probs), wsum, b, c](
                                    const std::vector<T>& g,
                                    typename Tensor<T>::GradSink& sink) {
      if (T* gl = sink.grad_for(logits)) {
        const T s = g[0] / wsum;
        for (int64_t i = 0; i < b; ++i) {
          const T wi = w[targets[i]];
          for (int64_t j = 0; j < c; ++j) {
            T d = probs[i * c + j];
            if (j == targets[i]) d -= T(1);
            gl[i * c + j] += s * wi * d;
          }
        }
      }
    });
  }
  return r;
}

// Concatenated per-dimension mean and population standard deviation over the
// rows of [T, D]; the variance is floored at 1e-9 before the square root.
template <typename T>
Tensor<T> mean_std_rows(const Tensor<T>& h) {
  if (h.ndim() != 2) {
    throw DimensionError("mean_std_rows: expected 2-d, got " +
                         shape_str(h.shape()));
  }
  const int64_t t = h.dim(0), d = h.dim(1);
  const T floor = T(1e-9);
  std::vector<T> out(static_cast<std::size_t>(2 * d), T(0));
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = 0; j < d; ++j) out[j] += h.data()[i * d + j];
  for (int64_t j = 0; j < d; ++j) out[j] /= T(t);
  std::vector<T> var(static_cast<std::size_t>(d), T(0));
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = 0; j < d; ++j) {
      const T diff = h.data()[i * d + j] - out[j];
      var[j] += diff * diff;
    }
  for (int64_t j = 0; j < d; ++j) {
    var[j] /= T(t);
    out[d + j] = std::sqrt(std::max(var[j], floor));
  }
  Tensor<T> r = Tensor<T>::from({2 * d}, std::move(out));
  if (Tensor<T>::recording({&h})) {
    r.attach_backward({h}, [h, r, var = std::move(var), t, d, floor](
                               const std::vector<T>& g,
                               typename Tensor<T>::GradSink& sink) {
      if (T* gh = sink.grad_for(h)) {
        const auto& o = r.data();
        for (int64_t i = 0; i < t; ++i)
          for (int64_t j = 0; j < d; ++j) {
            T acc = g[j] / T(t);
            if (var[j] > floor) {
              acc += g[d + j] * (h.data()[i * d + j] - o[j]) / (T(t) * o[d + j]);
            }
            gh[i * d + j] += acc;
          }
      }
    });
  }
  return r;
}

}  // namespace ops
}  // namespace speakerkit

#endif  // SPEAKERKIT_OPS_H_
