// Copyright 2026 The dmrseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dmrseg/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "dmrseg/error.hpp"

namespace dmrseg::autograd {
namespace {

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
              n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
              n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (!Tape<T>::current().recording()) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record(Tensor<T>& out, std::vector<ImplPtr<T>> inputs, std::function<void()> rule) {
  out.set_requires_grad(true);
  Tape<T>::current().record(TapeNode<T>{std::move(inputs), out.impl(), std::move(rule)});
}

void require(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

void require_4d(const Shape& s, const char* op) {
  require(s.size() == 4, std::string(op) + ": expected a 4-d tensor, got " + shape_str(s));
}

struct ConvGeometry {
  int channels, height, width;  // image side
  int ksize, pad, stride;
  int out_h, out_w;             // column grid side
};

// Output columns ox whose source column ox * stride - pad + kx is inside
// the image.
inline std::pair<int, int> valid_range(const ConvGeometry& g, int kx) {
  const int off = kx - g.pad;
  int lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  int hi = g.width - off <= 0 ? 0 : (g.width - off + g.stride - 1) / g.stride;
  lo = std::min(lo, g.out_w);
  hi = std::clamp(hi, lo, g.out_w);
  return {lo, hi};
}

// Columns for one image are written at column offset `col0` of a matrix with
// row length `ld`.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col, std::size_t ld, std::size_t col0) {
  const int kk = g.ksize * g.ksize;
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.ksize; ++ky) {
      for (int kx = 0; kx < g.ksize; ++kx) {
        T* row = col + static_cast<std::size_t>(c * kk + ky * g.ksize + kx) * ld + col0;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          const auto [lo, hi] = valid_range(g, kx);
          std::fill(dst, dst + lo, T(0));
          if (g.stride == 1) {
            std::copy(src + lo - g.pad + kx, src + hi - g.pad + kx, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride - g.pad + kx];
          }
          std::fill(dst + hi, dst + g.out_w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, std::size_t ld, std::size_t col0, T* img) {
  const int kk = g.ksize * g.ksize;
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < g.ksize; ++ky) {
      for (int kx = 0; kx < g.ksize; ++kx) {
        const T* row = col + static_cast<std::size_t>(c * kk + ky * g.ksize + kx) * ld + col0;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_w;
          T* dst = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          const auto [lo, hi] = valid_range(g, kx);
          const int off = kx - g.pad;
          for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride + off] += src[ox];
        }
      }
    }
  }
}

// Column matrices are capped at this many elements per chunk of the batch.
constexpr std::size_t kColumnBudget = std::size_t{1} << 24;

int chunk_items(std::size_t rows, std::size_t cols_per_item, int batch) {
  const std::size_t per = std::max<std::size_t>(1, rows * cols_per_item);
  return static_cast<int>(std::clamp<std::size_t>(kColumnBudget / per, 1, batch));
}

// [B][C][P] <-> [C][nb*P] for a chunk of items starting at b0.
template <typename T>
void gather_channels_major(const T* src, int b0, int nb, int channels, std::size_t plane, T* dst) {
  const std::size_t ld = static_cast<std::size_t>(nb) * plane;
  for (int bi = 0; bi < nb; ++bi) {
    for (int c = 0; c < channels; ++c) {
      const T* s = src + (static_cast<std::size_t>(b0 + bi) * channels + c) * plane;
      std::copy(s, s + plane, dst + c * ld + bi * plane);
    }
  }
}

template <typename T>
void scatter_channels_major_add(const T* src, int b0, int nb, int channels, std::size_t plane,
                                T* dst) {
  const std::size_t ld = static_cast<std::size_t>(nb) * plane;
  for (int bi = 0; bi < nb; ++bi) {
    for (int c = 0; c < channels; ++c) {
      const T* s = src + c * ld + bi * plane;
      T* d = dst + (static_cast<std::size_t>(b0 + bi) * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) d[p] += s[p];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int padding, int stride) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  require_4d(xs, "conv2d");
  require_4d(ks, "conv2d kernel");
  if (padding < 0 || stride < 1) throw UsageError("conv2d: padding >= 0 and stride >= 1 required");
  require(ks[2] == ks[3] && ks[2] % 2 == 1, "conv2d: kernel must be square with odd extent");
  require(ks[1] == xs[1], "conv2d: input has " + std::to_string(xs[1]) +
                              " channels, kernel expects " + std::to_string(ks[1]));
  const int batch = xs[0], cin = xs[1], h = xs[2], w = xs[3];
  const int cout = ks[0], k = ks[2];
  const int span_h = h + 2 * padding - k, span_w = w + 2 * padding - k;
  require(span_h >= 0 && span_w >= 0 && span_h % stride == 0 && span_w % stride == 0,
          "conv2d: output extent is not integral for input " + shape_str(xs));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == static_cast<std::size_t>(cout), "conv2d: bias extent");

  const ConvGeometry g{cin, h, w, k, padding, stride, span_h / stride + 1, span_w / stride + 1};
  const std::size_t plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t rows = static_cast<std::size_t>(cin) * k * k;
  const std::size_t in_plane = static_cast<std::size_t>(cin) * h * w;
  Tensor<T> out({batch, cout, g.out_h, g.out_w});

  const int chunk = chunk_items(rows, plane, batch);
  std::vector<T> col, tmp;
  const T* xd = input.data().data();
  const T* kd = kernel.data().data();
  T* od = out.data().data();
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    const std::size_t ld = nb * plane;
    col.resize(rows * ld);
    tmp.resize(static_cast<std::size_t>(cout) * ld);
    for (int bi = 0; bi < nb; ++bi) im2col(xd + (b0 + bi) * in_plane, g, col.data(), ld, bi * plane);
    // Pixel-major product (ld x cout); tall-skinny shapes run faster this way.
    gemm(true, true, static_cast<int>(ld), cout, static_cast<int>(rows), T(1), col.data(),
         static_cast<int>(ld), kd, static_cast<int>(rows), T(0), tmp.data(), cout);
    for (int bi = 0; bi < nb; ++bi) {
      for (int co = 0; co < cout; ++co) {
        const T* s = tmp.data() + bi * plane * cout + co;
        T* d = od + (static_cast<std::size_t>(b0 + bi) * cout + co) * plane;
        const T b = has_bias ? bias[co] : T(0);
        for (std::size_t p = 0; p < plane; ++p) d[p] = s[p * cout] + b;
      }
    }
  }

  if (should_record<T>({&input, &kernel, &bias})) {
    auto xi = input.impl(), ki = kernel.impl(), bi_ = bias.impl();
    TensorImpl<T>* oi = out.impl().get();
    std::vector<ImplPtr<T>> ins{xi, ki};
    if (has_bias) ins.push_back(bi_);
    record(out, std::move(ins), [=] {
      const T* go = oi->grad.data();
      if (has_bias && bi_->requires_grad) {
        bi_->ensure_grad();
        for (int b = 0; b < batch; ++b)
          for (int co = 0; co < cout; ++co) {
            const T* s = go + (static_cast<std::size_t>(b) * cout + co) * plane;
            T acc = 0;
            for (std::size_t p = 0; p < plane; ++p) acc += s[p];
            bi_->grad[co] += acc;
          }
      }
      const bool need_x = xi->requires_grad, need_k = ki->requires_grad;
      if (!need_x && !need_k) return;
      if (need_x) xi->ensure_grad();
      if (need_k) ki->ensure_grad();
      std::vector<T> col, gtmp;
      for (int b0 = 0; b0 < batch; b0 += chunk) {
        const int nb = std::min(chunk, batch - b0);
        const std::size_t ld = nb * plane;
        gtmp.resize(static_cast<std::size_t>(cout) * ld);
        gather_channels_major(go, b0, nb, cout, plane, gtmp.data());
        col.resize(rows * ld);
        if (need_k) {
          for (int bi = 0; bi < nb; ++bi)
            im2col(xi->data.data() + (b0 + bi) * in_plane, g, col.data(), ld, bi * plane);
          gemm(false, true, cout, static_cast<int>(rows), static_cast<int>(ld), T(1), gtmp.data(),
               static_cast<int>(ld), col.data(), static_cast<int>(ld), T(1), ki->grad.data(),
               static_cast<int>(rows));
        }
        if (need_x) {
          gemm(true, false, static_cast<int>(rows), static_cast<int>(ld), cout, T(1),
               ki->data.data(), static_cast<int>(rows), gtmp.data(), static_cast<int>(ld), T(0),
               col.data(), static_cast<int>(ld));
          for (int bi = 0; bi < nb; ++bi)
            col2im_add(col.data(), g, ld, bi * plane, xi->grad.data() + (b0 + bi) * in_plane);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride,
                           int padding) {
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  require_4d(xs, "conv_transpose2d");
  require_4d(ks, "conv_transpose2d kernel");
  if (padding < 0 || stride < 1) {
    throw UsageError("conv_transpose2d: padding >= 0 and stride >= 1 required");
  }
  require(ks[2] == ks[3], "conv_transpose2d: kernel must be square");
  require(ks[0] == xs[1], "conv_transpose2d: input has " + std::to_string(xs[1]) +
                              " channels, kernel expects " + std::to_string(ks[0]));
  const int batch = xs[0], cin = xs[1], hin = xs[2], win = xs[3];
  const int cout = ks[1], k = ks[2];
  const int hout = (hin - 1) * stride - 2 * padding + k;
  const int wout = (win - 1) * stride - 2 * padding + k;
  require(hout > 0 && wout > 0, "conv_transpose2d: empty output for " + shape_str(xs));

  // Geometry of the conv2d being transposed: image = our output.
  const ConvGeometry g{cout, hout, wout, k, padding, stride, hin, win};
  const std::size_t in_pix = static_cast<std::size_t>(hin) * win;
  const std::size_t out_plane = static_cast<std::size_t>(cout) * hout * wout;
  const std::size_t rows = static_cast<std::size_t>(cout) * k * k;
  Tensor<T> out({batch, cout, hout, wout});

  const int chunk = chunk_items(rows, in_pix, batch);
  std::vector<T> col, xtmp;
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    const std::size_t ld = nb * in_pix;
    xtmp.resize(static_cast<std::size_t>(cin) * ld);
    gather_channels_major(input.data().data(), b0, nb, cin, in_pix, xtmp.data());
    col.resize(rows * ld);
    gemm(true, false, static_cast<int>(rows), static_cast<int>(ld), cin, T(1),
         kernel.data().data(), static_cast<int>(rows), xtmp.data(), static_cast<int>(ld), T(0),
         col.data(), static_cast<int>(ld));
    for (int bi = 0; bi < nb; ++bi)
      col2im_add(col.data(), g, ld, bi * in_pix, out.data().data() + (b0 + bi) * out_plane);
  }

  if (should_record<T>({&input, &kernel})) {
    auto xi = input.impl(), ki = kernel.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {xi, ki}, [=] {
      const bool need_x = xi->requires_grad, need_k = ki->requires_grad;
      if (need_x) xi->ensure_grad();
      if (need_k) ki->ensure_grad();
      std::vector<T> gcol, xtmp, dx;
      for (int b0 = 0; b0 < batch; b0 += chunk) {
        const int nb = std::min(chunk, batch - b0);
        const std::size_t ld = nb * in_pix;
        gcol.resize(rows * ld);
        for (int bi = 0; bi < nb; ++bi)
          im2col(oi->grad.data() + (b0 + bi) * out_plane, g, gcol.data(), ld, bi * in_pix);
        if (need_k) {
          xtmp.resize(static_cast<std::size_t>(cin) * ld);
          gather_channels_major(xi->data.data(), b0, nb, cin, in_pix, xtmp.data());
          gemm(false, true, cin, static_cast<int>(rows), static_cast<int>(ld), T(1), xtmp.data(),
               static_cast<int>(ld), gcol.data(), static_cast<int>(ld), T(1), ki->grad.data(),
               static_cast<int>(rows));
        }
        if (need_x) {
          dx.resize(static_cast<std::size_t>(cin) * ld);
          gemm(false, false, cin, static_cast<int>(ld), static_cast<int>(rows), T(1),
               ki->data.data(), static_cast<int>(rows), gcol.data(), static_cast<int>(ld), T(0),
               dx.data(), static_cast<int>(ld));
          scatter_channels_major_add(dx.data(), b0, nb, cin, in_pix, xi->grad.data());
        }
      }
    });
  }
  return out;
}

template <typename T>
PoolResult<T> maxpool2x2_with_indices(const Tensor<T>& input) {
  const Shape& xs = input.shape();
  require_4d(xs, "maxpool2x2");
  require(xs[2] % 2 == 0 && xs[3] % 2 == 0,
          "maxpool2x2: spatial extents must be even, got " + shape_str(xs));
  const int planes = xs[0] * xs[1], h = xs[2], w = xs[3], oh = h / 2, ow = w / 2;
  PoolResult<T> res{Tensor<T>({xs[0], xs[1], oh, ow}), PoolIndices{xs, {}}};
  res.indices.index.resize(res.output.numel());
  const T* x = input.data().data();
  T* o = res.output.data().data();
  std::int32_t* idx = res.indices.index.data();
  for (int p = 0; p < planes; ++p) {
    const T* src = x + static_cast<std::size_t>(p) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        // Scan order is row-major within the window, so strict '>' keeps the
        // lowest flat index on ties.
        std::int32_t best = (2 * oy) * w + 2 * ox;
        const std::int32_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::int32_t c : cand)
          if (src[c] > src[best]) best = c;
        const std::size_t oidx = (static_cast<std::size_t>(p) * oh + oy) * ow + ox;
        o[oidx] = src[best];
        idx[oidx] = best;
      }
    }
  }
  if (should_record<T>({&input})) {
    auto xi = input.impl();
    TensorImpl<T>* oi = res.output.impl().get();
    auto indices = res.indices.index;
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    record(res.output, {xi}, [=] {
      xi->ensure_grad();
      for (std::size_t i = 0; i < indices.size(); ++i) {
        xi->grad[(i / out_plane) * in_plane + indices[i]] += oi->grad[i];
      }
    });
  }
  return res;
}

template <typename T>
Tensor<T> max_unpool2x2(const Tensor<T>& input, const PoolIndices& indices) {
  const Shape& xs = input.shape();
  require_4d(xs, "max_unpool2x2");
  const Shape& ts = indices.input_shape;
  require(ts.size() == 4 && ts[0] == xs[0] && ts[1] == xs[1] && ts[2] == 2 * xs[2] &&
              ts[3] == 2 * xs[3] && indices.index.size() == input.numel(),
          "max_unpool2x2: indices were recorded for " + shape_str(ts) + ", input is " +
              shape_str(xs));
  const int planes = xs[0] * xs[1], oh = xs[2], ow = xs[3], w = ts[3];
  const std::size_t in_plane = static_cast<std::size_t>(oh) * ow;
  const std::size_t out_plane = static_cast<std::size_t>(ts[2]) * w;
  for (int p = 0; p < planes; ++p) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const std::int32_t v = indices.index[p * in_plane + oy * ow + ox];
        const int y = v / w, x = v % w;
        if (v < 0 || (y >> 1) != oy || (x >> 1) != ox) {
          throw CorruptionError("max_unpool2x2: index " + std::to_string(v) +
                                " lies outside its 2x2 window at (" + std::to_string(oy) + "," +
                                std::to_string(ox) + ")");
        }
      }
    }
  }
  Tensor<T> out(ts);
  const T* x = input.data().data();
  T* o = out.data().data();
  for (std::size_t i = 0; i < input.numel(); ++i) {
    o[(i / in_plane) * out_plane + indices.index[i]] = x[i];
  }
  if (should_record<T>({&input})) {
    auto xi = input.impl();
    TensorImpl<T>* oi = out.impl().get();
    auto idx = indices.index;
    record(out, {xi}, [=] {
      xi->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        xi->grad[i] += oi->grad[(i / in_plane) * out_plane + idx[i]];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input) {
  const Shape& xs = input.shape();
  require_4d(xs, "upsample_nearest2x");
  const int planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  Tensor<T> out({xs[0], xs[1], 2 * h, 2 * w});
  const T* x = input.data().data();
  T* o = out.data().data();
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx)
        o[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + xx] =
            x[(static_cast<std::size_t>(p) * h + y / 2) * w + xx / 2];
  if (should_record<T>({&input})) {
    auto xi = input.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {xi}, [=] {
      xi->ensure_grad();
      for (int p = 0; p < planes; ++p)
        for (int y = 0; y < 2 * h; ++y)
          for (int xx = 0; xx < 2 * w; ++xx)
            xi->grad[(static_cast<std::size_t>(p) * h + y / 2) * w + xx / 2] +=
                oi->grad[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + xx];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require_4d(as, "concat_channels");
  require_4d(bs, "concat_channels");
  require(as[0] == bs[0] && as[2] == bs[2] && as[3] == bs[3],
          "concat_channels: " + shape_str(as) + " vs " + shape_str(bs));
  const int batch = as[0], ca = as[1], cb = bs[1];
  const std::size_t plane = static_cast<std::size_t>(as[2]) * as[3];
  const std::size_t na = ca * plane, nb = cb * plane;
  Tensor<T> out({batch, ca + cb, as[2], as[3]});
  T* o = out.data().data();
  for (int n = 0; n < batch; ++n) {
    std::copy_n(a.data().data() + n * na, na, o + n * (na + nb));
    std::copy_n(b.data().data() + n * nb, nb, o + n * (na + nb) + na);
  }
  if (should_record<T>({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {ai, bi}, [=] {
      for (int n = 0; n < batch; ++n) {
        const T* g = oi->grad.data() + n * (na + nb);
        if (ai->requires_grad) {
          ai->ensure_grad();
          for (std::size_t i = 0; i < na; ++i) ai->grad[n * na + i] += g[i];
        }
        if (bi->requires_grad) {
          bi->ensure_grad();
          for (std::size_t i = 0; i < nb; ++i) bi->grad[n * nb + i] += g[na + i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  const T* x = input.data().data();
  T* o = out.data().data();
  for (std::size_t i = 0; i < input.numel(); ++i) o[i] = x[i] > T(0) ? x[i] : T(0);
  if (should_record<T>({&input})) {
    auto xi = input.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {xi}, [=] {
      xi->ensure_grad();
      const T* xd = xi->data.data();
      const T* go = oi->grad.data();
      T* gx = xi->grad.data();
      const std::size_t n = xi->data.size();
      for (std::size_t i = 0; i < n; ++i) gx[i] += xd[i] > T(0) ? go[i] : T(0);
    });
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode) {
  const Shape& xs = input.shape();
  require_4d(xs, "batchnorm2d");
  const int batch = xs[0], c = xs[1];
  const std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
  const std::size_t count = batch * plane;
  require(gamma.numel() == static_cast<std::size_t>(c) && beta.numel() == gamma.numel(),
          "batchnorm2d: gamma/beta extent");
  require(state.running_mean.numel() == gamma.numel() && state.running_var.numel() == gamma.numel(),
          "batchnorm2d: running statistics extent");
  if (mode == Mode::kTrain && count < 2) {
    throw DimensionError("batchnorm2d: train mode needs batch*H*W >= 2");
  }
  const T eps = static_cast<T>(kBatchNormEps);
  const T momentum = static_cast<T>(kBatchNormMomentum);

  std::vector<T> mu(c), inv_std(c);
  const T* x = input.data().data();
  for (int ch = 0; ch < c; ++ch) {
    if (mode == Mode::kTrain) {
      double s = 0;
      for (int n = 0; n < batch; ++n) {
        const T* p = x + (static_cast<std::size_t>(n) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double ss = 0;
      for (int n = 0; n < batch; ++n) {
        const T* p = x + (static_cast<std::size_t>(n) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - m) * (p[i] - m);
      }
      const double var = ss / static_cast<double>(count);
      mu[ch] = static_cast<T>(m);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + kBatchNormEps));
      const double unbiased = ss / static_cast<double>(count - 1);
      state.running_mean[ch] = (T(1) - momentum) * state.running_mean[ch] + momentum * mu[ch];
      state.running_var[ch] =
          (T(1) - momentum) * state.running_var[ch] + momentum * static_cast<T>(unbiased);
    } else {
      mu[ch] = state.running_mean[ch];
      inv_std[ch] = T(1) / std::sqrt(state.running_var[ch] + eps);
    }
  }

  Tensor<T> out(xs);
  T* o = out.data().data();
  for (int n = 0; n < batch; ++n)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(n) * c + ch) * plane;
      const T g = gamma[ch], b = beta[ch], m = mu[ch], is = inv_std[ch];
      for (std::size_t i = 0; i < plane; ++i) o[off + i] = g * (x[off + i] - m) * is + b;
    }

  if (should_record<T>({&input, &gamma, &beta})) {
    auto xi = input.impl(), gi = gamma.impl(), bi = beta.impl();
    TensorImpl<T>* oi = out.impl().get();
    const bool train = mode == Mode::kTrain;
    record(out, {xi, gi, bi}, [=] {
      const T* go = oi->grad.data();
      const T* xd = xi->data.data();
      if (xi->requires_grad) xi->ensure_grad();
      if (gi->requires_grad) gi->ensure_grad();
      if (bi->requires_grad) bi->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double sum_g = 0, sum_gx = 0;
        for (int n = 0; n < batch; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * c + ch) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double xhat = (xd[off + i] - mu[ch]) * inv_std[ch];
            sum_g += go[off + i];
            sum_gx += go[off + i] * xhat;
          }
        }
        if (gi->requires_grad) gi->grad[ch] += static_cast<T>(sum_gx);
        if (bi->requires_grad) bi->grad[ch] += static_cast<T>(sum_g);
        if (!xi->requires_grad) continue;
        const double g = gi->data[ch];
        const double is = inv_std[ch];
        const double nn = static_cast<double>(count);
        for (int n = 0; n < batch; ++n) {
          const std::size_t off = (static_cast<std::size_t>(n) * c + ch) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            if (train) {
              const double xhat = (xd[off + i] - mu[ch]) * is;
              xi->grad[off + i] +=
                  static_cast<T>(g * is * (go[off + i] - sum_g / nn - xhat * sum_gx / nn));
            } else {
              xi->grad[off + i] += static_cast<T>(g * is * go[off + i]);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  const Shape& xs = logits.shape();
  require_4d(xs, "softmax_channels");
  const int batch = xs[0], c = xs[1];
  const std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
  Tensor<T> out(xs);
  const T* x = logits.data().data();
  T* o = out.data().data();
  for (int n = 0; n < batch; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      T mx = x[base + p];
      for (int ch = 1; ch < c; ++ch) mx = std::max(mx, x[base + ch * plane + p]);
      T s = 0;
      for (int ch = 0; ch < c; ++ch) {
        const T e = std::exp(x[base + ch * plane + p] - mx);
        o[base + ch * plane + p] = e;
        s += e;
      }
      for (int ch = 0; ch < c; ++ch) o[base + ch * plane + p] /= s;
    }
  }
  if (should_record<T>({&logits})) {
    auto xi = logits.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {xi}, [=] {
      xi->ensure_grad();
      const T* y = oi->data.data();
      const T* g = oi->grad.data();
      for (int n = 0; n < batch; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          T dot = 0;
          for (int ch = 0; ch < c; ++ch) dot += g[base + ch * plane + p] * y[base + ch * plane + p];
          for (int ch = 0; ch < c; ++ch) {
            const std::size_t i = base + ch * plane + p;
            xi->grad[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::int32_t> labels) {
  const Shape& xs = logits.shape();
  require_4d(xs, "cross_entropy_loss");
  const int batch = xs[0], c = xs[1];
  const std::size_t plane = static_cast<std::size_t>(xs[2]) * xs[3];
  const std::size_t count = batch * plane;
  require(labels.size() == count, "cross_entropy_loss: " + std::to_string(labels.size()) +
                                      " labels for logits " + shape_str(xs));
  for (std::int32_t l : labels) {
    if (l < 0 || l >= c) {
      throw LabelError("cross_entropy_loss: label " + std::to_string(l) + " outside [0, " +
                       std::to_string(c) + ")");
    }
  }
  const T* x = logits.data().data();
  // Softmax probabilities are kept for the backward rule.
  std::vector<T> prob(logits.numel());
  double total = 0;
  for (int n = 0; n < batch; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      T mx = x[base + p];
      for (int ch = 1; ch < c; ++ch) mx = std::max(mx, x[base + ch * plane + p]);
      T s = 0;
      for (int ch = 0; ch < c; ++ch) {
        const T e = std::exp(x[base + ch * plane + p] - mx);
        prob[base + ch * plane + p] = e;
        s += e;
      }
      for (int ch = 0; ch < c; ++ch) prob[base + ch * plane + p] /= s;
      const int y = labels[n * plane + p];
      total += static_cast<double>(mx) + std::log(static_cast<double>(s)) -
               static_cast<double>(x[base + y * plane + p]);
    }
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(count)));
  if (should_record<T>({&logits})) {
    auto xi = logits.impl();
    TensorImpl<T>* oi = out.impl().get();
    std::vector<std::int32_t> lab(labels.begin(), labels.end());
    record(out, {xi}, [=, prob = std::move(prob)] {
      xi->ensure_grad();
      const T g = oi->grad[0] / static_cast<T>(count);
      for (int n = 0; n < batch; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          const int y = lab[n * plane + p];
          for (int ch = 0; ch < c; ++ch) {
            const std::size_t i = base + ch * plane + p;
            xi->grad[i] += g * (prob[i] - (ch == y ? T(1) : T(0)));
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mad_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(),
          "mad_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  const std::size_t n = pred.numel();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(static_cast<double>(pred[i] - target[i]));
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(n)));
  if (should_record<T>({&pred, &target})) {
    auto pi = pred.impl(), ti = target.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {pi, ti}, [=] {
      const T g = oi->grad[0] / static_cast<T>(n);
      if (pi->requires_grad) pi->ensure_grad();
      if (ti->requires_grad) ti->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const T d = pi->data[i] - ti->data[i];
        const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        if (pi->requires_grad) pi->grad[i] += g * s;
        if (ti->requires_grad) ti->grad[i] -= g * s;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  if (should_record<T>({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {ai, bi}, [=] {
      for (auto* in : {ai.get(), bi.get()}) {
        if (!in->requires_grad) continue;
        in->ensure_grad();
        for (std::size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += oi->grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  if (should_record<T>({&a, &b})) {
    auto ai = a.impl(), bi = b.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {ai, bi}, [=] {
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += oi->grad[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < bi->grad.size(); ++i) bi->grad[i] += oi->grad[i] * ai->data[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * factor;
  if (should_record<T>({&a})) {
    auto ai = a.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {ai}, [=] {
      ai->ensure_grad();
      for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += oi->grad[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = std::exp(a[i]);
  if (should_record<T>({&a})) {
    auto ai = a.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {ai}, [=] {
      ai->ensure_grad();
      for (std::size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += oi->grad[i] * oi->data[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double s = 0;
  for (T v : a.data()) s += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
  if (should_record<T>({&a})) {
    auto ai = a.impl();
    TensorImpl<T>* oi = out.impl().get();
    record(out, {ai}, [=] {
      ai->ensure_grad();
      for (auto& g : ai->grad) g += oi->grad[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), static_cast<T>(1.0 / static_cast<double>(a.numel())));
}

#define DMRSEG_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);   \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, int, int);           \
  template PoolResult<T> maxpool2x2_with_indices(const Tensor<T>&);                            \
  template Tensor<T> max_unpool2x2(const Tensor<T>&, const PoolIndices&);                      \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                     \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                 BatchNormState<T>&, Mode);                                    \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                       \
  template Tensor<T> cross_entropy_loss(const Tensor<T>&, std::span<const std::int32_t>);      \
  template Tensor<T> mad_loss(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> exp(const Tensor<T>&);                                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);

DMRSEG_INSTANTIATE_OPS(float)
DMRSEG_INSTANTIATE_OPS(double)

}  // namespace dmrseg::autograd
