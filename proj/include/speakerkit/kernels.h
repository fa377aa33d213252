// speakerkit/kernels.h

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

// Dense compute kernels on raw contiguous arrays.
//
// Every kernel is written so that each OUTPUT element is produced by exactly
// one serial reduction with a fixed iteration order.  The OpenMP variants in
// speakerkit::kernels only distribute independent output rows/channels across
// threads and call the same per-row routines as the serial reference in
// speakerkit::kernels::serial, so both produce bit-identical results for any
// thread count.  The serial namespace is kept for testing and benchmarking.

#ifndef SPEAKERKIT_KERNELS_H_
#define SPEAKERKIT_KERNELS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace speakerkit {
namespace kernels {

using std::int64_t;

// The per-row helpers below are deliberately kept out of line: every caller
// (serial reference, OpenMP wrapper, any TU) then runs the exact same
// machine code, so floating-point contraction cannot differ between call
// sites and the two lanes stay bit-identical.
#if defined(__GNUC__) || defined(__clang__)
#define SPEAKERKIT_NOINLINE __attribute__((noinline))
#else
#define SPEAKERKIT_NOINLINE
#endif

namespace detail {

// Dot product with eight independent accumulators folded in a fixed order;
// breaks the serial FP dependence chain so the compiler can pipeline or
// vectorize it, while staying deterministic for a given length.
template <typename T>
inline T unrolled_dot(const T* a, const T* b, int64_t n) {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  int64_t x = 0;
  for (; x + 8 <= n; x += 8) {
    acc[0] += a[x] * b[x];
    acc[1] += a[x + 1] * b[x + 1];
    acc[2] += a[x + 2] * b[x + 2];
    acc[3] += a[x + 3] * b[x + 3];
    acc[4] += a[x + 4] * b[x + 4];
    acc[5] += a[x + 5] * b[x + 5];
    acc[6] += a[x + 6] * b[x + 6];
    acc[7] += a[x + 7] * b[x + 7];
  }
  for (int u = 0; x < n; ++x, ++u) acc[u] += a[x] * b[x];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// out_row[0..n) += sum_k a_row[k] * b[k, 0..n)
template <typename T>
SPEAKERKIT_NOINLINE void matmul_nn_row(const T* a_row, const T* b, T* out_row, int64_t k,
                          int64_t n) {
  for (int64_t kk = 0; kk < k; ++kk) {
    const T av = a_row[kk];
    const T* brow = b + kk * n;
    for (int64_t j = 0; j < n; ++j) out_row[j] += av * brow[j];
  }
}

// out_row[0..n) += a_row . b_row_j  (b given row-major [n, k])
template <typename T>
SPEAKERKIT_NOINLINE void matmul_nt_row(const T* a_row, const T* b, T* out_row, int64_t k,
                          int64_t n) {
  for (int64_t j = 0; j < n; ++j)
    out_row[j] += unrolled_dot(a_row, b + j * k, k);
}

// out[kk, 0..n) += sum_i a[i, kk] * b[i, 0..n)
template <typename T>
SPEAKERKIT_NOINLINE void matmul_tn_row(const T* a, const T* b, T* out_row, int64_t m,
                          int64_t k, int64_t n, int64_t kk) {
  for (int64_t i = 0; i < m; ++i) {
    const T av = a[i * k + kk];
    const T* brow = b + i * n;
    for (int64_t j = 0; j < n; ++j) out_row[j] += av * brow[j];
  }
}

// One output channel of a 3x3 same convolution over a pre-padded input
// [ci, h+2, w+2].  Accumulation order (ci, dy, dx) is fixed.
template <typename T>
SPEAKERKIT_NOINLINE void conv3x3_fwd_channel(const T* in_pad, const T* w, T bias, T* out,
                                int64_t cin, int64_t h, int64_t wd) {
  const int64_t wp = wd + 2;
  const int64_t n = h * wd;
  for (int64_t i = 0; i < n; ++i) out[i] = bias;
  for (int64_t ci = 0; ci < cin; ++ci) {
    const T* chan = in_pad + ci * (h + 2) * wp;
    const T* wk = w + ci * 9;
    for (int64_t dy = 0; dy < 3; ++dy) {
      for (int64_t dx = 0; dx < 3; ++dx) {
        const T wv = wk[dy * 3 + dx];
        for (int64_t y = 0; y < h; ++y) {
          const T* src = chan + (y + dy) * wp + dx;
          T* dst = out + y * wd;
          for (int64_t x = 0; x < wd; ++x) dst[x] += wv * src[x];
        }
      }
    }
  }
}

// One input channel of the gradient w.r.t. the convolution input, computed
// as a full correlation of the padded upstream gradient with the flipped
// filters.  dout_pad is [cout, h+2, w+2].
template <typename T>
SPEAKERKIT_NOINLINE void conv3x3_bwd_input_channel(const T* dout_pad, const T* w,
                                      T* din_chan, int64_t cout, int64_t cin,
                                      int64_t h, int64_t wd, int64_t ci) {
  const int64_t wp = wd + 2;
  for (int64_t co = 0; co < cout; ++co) {
    const T* gchan = dout_pad + co * (h + 2) * wp;
    const T* wk = w + (co * cin + ci) * 9;
    for (int64_t dy = 0; dy < 3; ++dy) {
      for (int64_t dx = 0; dx < 3; ++dx) {
        const T wv = wk[(2 - dy) * 3 + (2 - dx)];
        for (int64_t y = 0; y < h; ++y) {
          const T* src = gchan + (y + dy) * wp + dx;
          T* dst = din_chan + y * wd;
          for (int64_t x = 0; x < wd; ++x) dst[x] += wv * src[x];
        }
      }
    }
  }
}

// Filter and bias gradients for one output channel.
template <typename T>
SPEAKERKIT_NOINLINE void conv3x3_bwd_filters_channel(const T* dout, const T* in_pad,
                                        T* dw, T* dbias, int64_t cin,
                                        int64_t h, int64_t wd, int64_t co) {
  const int64_t wp = wd + 2;
  const T* gchan = dout + co * h * wd;
  T bacc = T(0);
  for (int64_t i = 0; i < h * wd; ++i) bacc += gchan[i];
  dbias[co] += bacc;
  T* dwc = dw + co * cin * 9;
  for (int64_t ci = 0; ci < cin; ++ci) {
    const T* chan = in_pad + ci * (h + 2) * wp;
    for (int64_t dy = 0; dy < 3; ++dy) {
      for (int64_t dx = 0; dx < 3; ++dx) {
        T acc = T(0);
        for (int64_t y = 0; y < h; ++y)
          acc += unrolled_dot(gchan + y * wd, chan + (y + dy) * wp + dx, wd);
        dwc[ci * 9 + dy * 3 + dx] += acc;
      }
    }
  }
}

// 2x2/stride-2 max pooling of one channel; ties break toward the first
// element in row-major window order.  argmax stores flat in-channel indices.
template <typename T>
SPEAKERKIT_NOINLINE void maxpool2x2_channel(const T* in, T* out, int32_t* argmax,
                               int64_t h, int64_t wd, int64_t ho, int64_t wo) {
  for (int64_t y = 0; y < ho; ++y) {
    for (int64_t x = 0; x < wo; ++x) {
      const int64_t base = 2 * y * wd + 2 * x;
      int64_t best = base;
      T bv = in[base];
      const int64_t cand[3] = {base + 1, base + wd, base + wd + 1};
      for (int64_t c : cand) {
        if (in[c] > bv) {
          bv = in[c];
          best = c;
        }
      }
      out[y * wo + x] = bv;
      argmax[y * wo + x] = static_cast<int32_t>(best);
    }
  }
}

// Zero-pads [c, h, w] to [c, h+2, w+2] with a one-element border.
template <typename T>
inline std::vector<T> pad_border1(const T* in, int64_t c, int64_t h,
                                  int64_t wd) {
  const int64_t hp = h + 2, wp = wd + 2;
  std::vector<T> out(static_cast<std::size_t>(c * hp * wp), T(0));
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < h; ++y) {
      const T* src = in + (ch * h + y) * wd;
      T* dst = out.data() + (ch * hp + y + 1) * wp + 1;
      std::copy(src, src + wd, dst);
    }
  }
  return out;
}

}  // namespace detail

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------------------
// Serial reference implementations.
// ---------------------------------------------------------------------------

namespace serial {

template <typename T>
void matmul_nn_acc(const T* a, const T* b, T* out, int64_t m, int64_t k,
                   int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    detail::matmul_nn_row(a + i * k, b, out + i * n, k, n);
}

template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* out, int64_t m, int64_t k,
                   int64_t n) {
  for (int64_t i = 0; i < m; ++i)
    detail::matmul_nt_row(a + i * k, b, out + i * n, k, n);
}

template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* out, int64_t m, int64_t k,
                   int64_t n) {
  for (int64_t kk = 0; kk < k; ++kk)
    detail::matmul_tn_row(a, b, out + kk * n, m, k, n, kk);
}

template <typename T>
void conv3x3_same_fwd(const T* in, const T* w, const T* bias, T* out,
                      int64_t cin, int64_t cout, int64_t h, int64_t wd) {
  std::vector<T> pad = detail::pad_border1(in, cin, h, wd);
  for (int64_t co = 0; co < cout; ++co)
    detail::conv3x3_fwd_channel(pad.data(), w + co * cin * 9, bias[co],
                                out + co * h * wd, cin, h, wd);
}

template <typename T>
void conv3x3_same_bwd_input(const T* dout, const T* w, T* din_acc,
                            int64_t cin, int64_t cout, int64_t h, int64_t wd) {
  std::vector<T> pad = detail::pad_border1(dout, cout, h, wd);
  for (int64_t ci = 0; ci < cin; ++ci)
    detail::conv3x3_bwd_input_channel(pad.data(), w, din_acc + ci * h * wd,
                                      cout, cin, h, wd, ci);
}

template <typename T>
void conv3x3_same_bwd_filters(const T* dout, const T* in, T* dw_acc,
                              T* dbias_acc, int64_t cin, int64_t cout,
                              int64_t h, int64_t wd) {
  std::vector<T> pad = detail::pad_border1(in, cin, h, wd);
  for (int64_t co = 0; co < cout; ++co)
    detail::conv3x3_bwd_filters_channel(dout, pad.data(), dw_acc, dbias_acc,
                                        cin, h, wd, co);
}

template <typename T>
void maxpool2x2_fwd(const T* in, T* out, int32_t* argmax, int64_t c,
                    int64_t h, int64_t wd, int64_t ho, int64_t wo) {
  for (int64_t ch = 0; ch < c; ++ch)
    detail::maxpool2x2_channel(in + ch * h * wd, out + ch * ho * wo,
                               argmax + ch * ho * wo, h, wd, ho, wo);
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP variants.  Same per-row routines, rows distributed across threads;
// with a single thread they fall straight through to the serial reference,
// so results are bit-identical for any thread count.
// ---------------------------------------------------------------------------

template <typename T>
void matmul_nn_acc(const T* a, const T* b, T* out, int64_t m, int64_t k,
                   int64_t n) {
  if (max_threads() == 1) return serial::matmul_nn_acc(a, b, out, m, k, n);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i)
    detail::matmul_nn_row(a + i * k, b, out + i * n, k, n);
}

template <typename T>
void matmul_nt_acc(const T* a, const T* b, T* out, int64_t m, int64_t k,
                   int64_t n) {
  if (max_threads() == 1) return serial::matmul_nt_acc(a, b, out, m, k, n);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i)
    detail::matmul_nt_row(a + i * k, b, out + i * n, k, n);
}

template <typename T>
void matmul_tn_acc(const T* a, const T* b, T* out, int64_t m, int64_t k,
                   int64_t n) {
  if (max_threads() == 1) return serial::matmul_tn_acc(a, b, out, m, k, n);
#pragma omp parallel for schedule(static)
  for (int64_t kk = 0; kk < k; ++kk)
    detail::matmul_tn_row(a, b, out + kk * n, m, k, n, kk);
}

template <typename T>
void conv3x3_same_fwd(const T* in, const T* w, const T* bias, T* out,
                      int64_t cin, int64_t cout, int64_t h, int64_t wd) {
  if (max_threads() == 1)
    return serial::conv3x3_same_fwd(in, w, bias, out, cin, cout, h, wd);
  std::vector<T> pad = detail::pad_border1(in, cin, h, wd);
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < cout; ++co)
    detail::conv3x3_fwd_channel(pad.data(), w + co * cin * 9, bias[co],
                                out + co * h * wd, cin, h, wd);
}

template <typename T>
void conv3x3_same_bwd_input(const T* dout, const T* w, T* din_acc,
                            int64_t cin, int64_t cout, int64_t h, int64_t wd) {
  if (max_threads() == 1)
    return serial::conv3x3_same_bwd_input(dout, w, din_acc, cin, cout, h, wd);
  std::vector<T> pad = detail::pad_border1(dout, cout, h, wd);
#pragma omp parallel for schedule(static)
  for (int64_t ci = 0; ci < cin; ++ci)
    detail::conv3x3_bwd_input_channel(pad.data(), w, din_acc + ci * h * wd,
                                      cout, cin, h, wd, ci);
}

template <typename T>
void conv3x3_same_bwd_filters(const T* dout, const T* in, T* dw_acc,
                              T* dbias_acc, int64_t cin, int64_t cout,
                              int64_t h, int64_t wd) {
  if (max_threads() == 1)
    return serial::conv3x3_same_bwd_filters(dout, in, dw_acc, dbias_acc, cin,
                                            cout, h, wd);
  std::vector<T> pad = detail::pad_border1(in, cin, h, wd);
#pragma omp parallel for schedule(static)
  for (int64_t co = 0; co < cout; ++co)
    detail::conv3x3_bwd_filters_channel(dout, pad.data(), dw_acc, dbias_acc,
                                        cin, h, wd, co);
}

template <typename T>
void maxpool2x2_fwd(const T* in, T* out, int32_t* argmax, int64_t c,
                    int64_t h, int64_t wd, int64_t ho, int64_t wo) {
  if (max_threads() == 1)
    return serial::maxpool2x2_fwd(in, out, argmax, c, h, wd, ho, wo);
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch)
    detail::maxpool2x2_channel(in + ch * h * wd, out + ch * ho * wo,
                               argmax + ch * ho * wo, h, wd, ho, wo);
}

// Scatter of pooled gradients back to the recorded argmax positions.  Each
// channel's argmax indices are disjoint, so the channel loop is parallel.
template <typename T>
void maxpool2x2_bwd(const T* dout, const int32_t* argmax, T* din_acc,
                    int64_t c, int64_t h, int64_t wd, int64_t ho, int64_t wo) {
#pragma omp parallel for schedule(static) if (c > 1 && max_threads() > 1)
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* g = dout + ch * ho * wo;
    const int32_t* am = argmax + ch * ho * wo;
    T* d = din_acc + ch * h * wd;
    for (int64_t i = 0; i < ho * wo; ++i) d[am[i]] += g[i];
  }
}

// Numerically stabilized softmax of one contiguous vector.
template <typename T>
inline void softmax_vec(const T* x, T* out, int64_t n) {
  T mx = x[0];
  for (int64_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  T sum = T(0);
  for (int64_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  const T inv = T(1) / sum;
  for (int64_t i = 0; i < n; ++i) out[i] *= inv;
}

}  // namespace kernels
}  // namespace speakerkit

#endif  // SPEAKERKIT_KERNELS_H_
