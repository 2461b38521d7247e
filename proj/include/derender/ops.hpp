// Copyright 2026 The Derender Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "derender/tape.hpp"

// Built-in tensor operations. Every op records an exact backward rule;
// gradients are checked against central finite differences in the test
// suite, so keep forward and backward in one place.
namespace derender::ad {

namespace detail {

inline void check_same_shape(const char* op, const Var& a, const Var& b) {
  require(a.shape() == b.shape(), op, ": shape mismatch ", shape_str(a.shape()),
          " vs ", shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape("add", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return a.tape().record("add", {a, b}, std::move(out),
                         [ia = a.id(), ib = b.id()](Tape& t, const Tensor& g, int) {
                           t.accumulate_grad(ia, g);
                           t.accumulate_grad(ib, g);
                         });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return a.tape().record("sub", {a, b}, std::move(out),
                         [ia = a.id(), ib = b.id()](Tape& t, const Tensor& g, int) {
                           t.accumulate_grad(ia, g);
                           Tensor ng = g;
                           for (real& v : ng.data) v = -v;
                           t.accumulate_grad(ib, ng);
                         });
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return a.tape().record("mul", {a, b}, std::move(out),
                         [ia = a.id(), ib = b.id()](Tape& t, const Tensor& g, int) {
                           const Tensor& av = t.value(ia);
                           const Tensor& bv2 = t.value(ib);
                           Tensor ga = g, gb = g;
                           for (int64_t i = 0; i < g.numel(); ++i) {
                             ga[i] *= bv2[i];
                             gb[i] *= av[i];
                           }
                           t.accumulate_grad(ia, ga);
                           t.accumulate_grad(ib, gb);
                         });
}

inline Var add_scalar(const Var& a, real c) {
  Tensor out = a.value();
  for (real& v : out.data) v += c;
  return a.tape().record("add_scalar", {a}, std::move(out),
                         [ia = a.id()](Tape& t, const Tensor& g, int) {
                           t.accumulate_grad(ia, g);
                         });
}

inline Var mul_scalar(const Var& a, real c) {
  Tensor out = a.value();
  for (real& v : out.data) v *= c;
  return a.tape().record("mul_scalar", {a}, std::move(out),
                         [ia = a.id(), c](Tape& t, const Tensor& g, int) {
                           Tensor ga = g;
                           for (real& v : ga.data) v *= c;
                           t.accumulate_grad(ia, ga);
                         });
}

inline Var neg(const Var& a) { return mul_scalar(a, -1); }

inline Var relu(const Var& a) {
  Tensor out = a.value();
  for (real& v : out.data) v = std::max<real>(v, 0);
  return a.tape().record("relu", {a}, std::move(out),
                         [ia = a.id()](Tape& t, const Tensor& g, int) {
                           const Tensor& av = t.value(ia);
                           Tensor ga = g;
                           for (int64_t i = 0; i < g.numel(); ++i)
                             if (av[i] <= 0) ga[i] = 0;
                           t.accumulate_grad(ia, ga);
                         });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (real& v : out.data) v = real(1) / (real(1) + std::exp(-v));
  return a.tape().record("sigmoid", {a}, std::move(out),
                         [ia = a.id()](Tape& t, const Tensor& g, int out_id) {
                           const Tensor& y = t.value(out_id);
                           Tensor ga = g;
                           for (int64_t i = 0; i < g.numel(); ++i)
                             ga[i] *= y[i] * (real(1) - y[i]);
                           t.accumulate_grad(ia, ga);
                         });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2, "matmul: expects rank-2 operands, got ",
          shape_str(av.shape), " and ", shape_str(bv.shape));
  require(av.shape[1] == bv.shape[0], "matmul: inner dimensions differ: ",
          shape_str(av.shape), " x ", shape_str(bv.shape));
  const int64_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor out(Shape{m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const real aip = av[i * k + p];
      if (aip == 0) continue;
      const real* brow = &bv.data[static_cast<size_t>(p * n)];
      real* orow = &out.data[static_cast<size_t>(i * n)];
      for (int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  return a.tape().record(
      "matmul", {a, b}, std::move(out),
      [ia = a.id(), ib = b.id(), m, k, n](Tape& t, const Tensor& g, int) {
        const Tensor& av2 = t.value(ia);
        const Tensor& bv2 = t.value(ib);
        if (t.needs_grad(ia)) {
          Tensor ga(Shape{m, k});
          for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
              const real gij = g[i * n + j];
              if (gij == 0) continue;
              for (int64_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv2[p * n + j];
            }
          t.accumulate_grad(ia, ga);
        }
        if (t.needs_grad(ib)) {
          Tensor gb(Shape{k, n});
          for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
              const real aip = av2[i * k + p];
              if (aip == 0) continue;
              for (int64_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
            }
          t.accumulate_grad(ib, gb);
        }
      });
}

inline Var transpose(const Var& a) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "transpose: expects rank-2, got ", shape_str(av.shape));
  const int64_t r = av.shape[0], c = av.shape[1];
  Tensor out(Shape{c, r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return a.tape().record("transpose", {a}, std::move(out),
                         [ia = a.id(), r, c](Tape& t, const Tensor& g, int) {
                           Tensor ga(Shape{r, c});
                           for (int64_t i = 0; i < r; ++i)
                             for (int64_t j = 0; j < c; ++j) ga[i * c + j] = g[j * r + i];
                           t.accumulate_grad(ia, ga);
                         });
}

inline Var reshape(const Var& a, Shape s) {
  const Tensor& av = a.value();
  require(shape_numel(s) == av.numel(), "reshape: cannot view ", shape_str(av.shape),
          " as ", shape_str(s));
  Tensor out = av;
  out.shape = s;
  return a.tape().record("reshape", {a}, std::move(out),
                         [ia = a.id(), old = av.shape](Tape& t, const Tensor& g, int) {
                           Tensor ga = g;
                           ga.shape = old;
                           t.accumulate_grad(ia, ga);
                         });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Var sum_all(const Var& a) {
  real s = 0;
  for (real v : a.value().data) s += v;
  return a.tape().record("sum_all", {a}, Tensor::scalar(s),
                         [ia = a.id()](Tape& t, const Tensor& g, int) {
                           Tensor ga(t.value(ia).shape, g[0]);
                           t.accumulate_grad(ia, ga);
                         });
}

inline Var mean_all(const Var& a) {
  const int64_t n = a.value().numel();
  require(n > 0, "mean_all: empty tensor");
  real s = 0;
  for (real v : a.value().data) s += v;
  return a.tape().record("mean_all", {a}, Tensor::scalar(s / static_cast<real>(n)),
                         [ia = a.id(), n](Tape& t, const Tensor& g, int) {
                           Tensor ga(t.value(ia).shape, g[0] / static_cast<real>(n));
                           t.accumulate_grad(ia, ga);
                         });
}

// Inner product of two equal-shaped tensors; the weighted-sum primitive used
// for expectations over pixel grids.
inline Var weighted_sum(const Var& values, const Var& weights) {
  detail::check_same_shape("weighted_sum", values, weights);
  const Tensor& av = values.value();
  const Tensor& bv = weights.value();
  real s = 0;
  for (int64_t i = 0; i < av.numel(); ++i) s += av[i] * bv[i];
  return values.tape().record(
      "weighted_sum", {values, weights}, Tensor::scalar(s),
      [ia = values.id(), ib = weights.id()](Tape& t, const Tensor& g, int) {
        const Tensor& av2 = t.value(ia);
        const Tensor& bv2 = t.value(ib);
        if (t.needs_grad(ia)) {
          Tensor ga = bv2;
          for (real& v : ga.data) v *= g[0];
          t.accumulate_grad(ia, ga);
        }
        if (t.needs_grad(ib)) {
          Tensor gb = av2;
          for (real& v : gb.data) v *= g[0];
          t.accumulate_grad(ib, gb);
        }
      });
}

// ---------------------------------------------------------------------------
// Row-structured ops (meshes, quaternion batches)
// ---------------------------------------------------------------------------

inline Var gather_rows(const Var& a, std::vector<int64_t> idx) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "gather_rows: expects rank-2, got ", shape_str(av.shape));
  const int64_t r = av.shape[0], c = av.shape[1];
  for (int64_t i : idx)
    require(i >= 0 && i < r, "gather_rows: index ", i, " out of range [0,", r, ")");
  Tensor out(Shape{static_cast<int64_t>(idx.size()), c});
  for (size_t k = 0; k < idx.size(); ++k)
    for (int64_t j = 0; j < c; ++j) out[static_cast<int64_t>(k) * c + j] = av[idx[k] * c + j];
  return a.tape().record("gather_rows", {a}, std::move(out),
                         [ia = a.id(), idx = std::move(idx), r, c](Tape& t, const Tensor& g,
                                                                   int) {
                           Tensor ga(Shape{r, c});
                           for (size_t k = 0; k < idx.size(); ++k)
                             for (int64_t j = 0; j < c; ++j)
                               ga[idx[k] * c + j] += g[static_cast<int64_t>(k) * c + j];
                           t.accumulate_grad(ia, ga);
                         });
}

inline Var rows_dot(const Var& a, const Var& b) {
  detail::check_same_shape("rows_dot", a, b);
  const Tensor& av = a.value();
  require(av.rank() == 2, "rows_dot: expects rank-2, got ", shape_str(av.shape));
  const int64_t r = av.shape[0], c = av.shape[1];
  const Tensor& bv = b.value();
  Tensor out(Shape{r});
  for (int64_t i = 0; i < r; ++i) {
    real s = 0;
    for (int64_t j = 0; j < c; ++j) s += av[i * c + j] * bv[i * c + j];
    out[i] = s;
  }
  return a.tape().record("rows_dot", {a, b}, std::move(out),
                         [ia = a.id(), ib = b.id(), r, c](Tape& t, const Tensor& g, int) {
                           const Tensor& av2 = t.value(ia);
                           const Tensor& bv2 = t.value(ib);
                           Tensor ga(Shape{r, c}), gb(Shape{r, c});
                           for (int64_t i = 0; i < r; ++i)
                             for (int64_t j = 0; j < c; ++j) {
                               ga[i * c + j] = g[i] * bv2[i * c + j];
                               gb[i * c + j] = g[i] * av2[i * c + j];
                             }
                           t.accumulate_grad(ia, ga);
                           t.accumulate_grad(ib, gb);
                         });
}

// Row-wise 3D cross product: out[i] = a[i] x b[i].
inline Var cross_rows(const Var& a, const Var& b) {
  detail::check_same_shape("cross_rows", a, b);
  const Tensor& av = a.value();
  require(av.rank() == 2 && av.shape[1] == 3, "cross_rows: expects [R,3], got ",
          shape_str(av.shape));
  const int64_t r = av.shape[0];
  const Tensor& bv = b.value();
  Tensor out(Shape{r, 3});
  for (int64_t i = 0; i < r; ++i) {
    const real *x = &av.data[static_cast<size_t>(i * 3)], *y = &bv.data[static_cast<size_t>(i * 3)];
    out[i * 3 + 0] = x[1] * y[2] - x[2] * y[1];
    out[i * 3 + 1] = x[2] * y[0] - x[0] * y[2];
    out[i * 3 + 2] = x[0] * y[1] - x[1] * y[0];
  }
  // d(a x b): grad_a = b x g, grad_b = g x a
  return a.tape().record("cross_rows", {a, b}, std::move(out),
                         [ia = a.id(), ib = b.id(), r](Tape& t, const Tensor& g, int) {
                           const Tensor& av2 = t.value(ia);
                           const Tensor& bv2 = t.value(ib);
                           Tensor ga(Shape{r, 3}), gb(Shape{r, 3});
                           for (int64_t i = 0; i < r; ++i) {
                             const real* x = &av2.data[static_cast<size_t>(i * 3)];
                             const real* y = &bv2.data[static_cast<size_t>(i * 3)];
                             const real* gg = &g.data[static_cast<size_t>(i * 3)];
                             ga[i * 3 + 0] = y[1] * gg[2] - y[2] * gg[1];
                             ga[i * 3 + 1] = y[2] * gg[0] - y[0] * gg[2];
                             ga[i * 3 + 2] = y[0] * gg[1] - y[1] * gg[0];
                             gb[i * 3 + 0] = gg[1] * x[2] - gg[2] * x[1];
                             gb[i * 3 + 1] = gg[2] * x[0] - gg[0] * x[2];
                             gb[i * 3 + 2] = gg[0] * x[1] - gg[1] * x[0];
                           }
                           t.accumulate_grad(ia, ga);
                           t.accumulate_grad(ib, gb);
                         });
}

// Scale row i of a by s[i].
inline Var scale_rows(const Var& a, const Var& s) {
  const Tensor& av = a.value();
  const Tensor& sv = s.value();
  require(av.rank() == 2 && sv.rank() == 1 && sv.shape[0] == av.shape[0],
          "scale_rows: expects [R,C] and [R], got ", shape_str(av.shape), " and ",
          shape_str(sv.shape));
  const int64_t r = av.shape[0], c = av.shape[1];
  Tensor out = av;
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[i * c + j] *= sv[i];
  return a.tape().record("scale_rows", {a, s}, std::move(out),
                         [ia = a.id(), is = s.id(), r, c](Tape& t, const Tensor& g, int) {
                           const Tensor& av2 = t.value(ia);
                           const Tensor& sv2 = t.value(is);
                           if (t.needs_grad(ia)) {
                             Tensor ga = g;
                             for (int64_t i = 0; i < r; ++i)
                               for (int64_t j = 0; j < c; ++j) ga[i * c + j] *= sv2[i];
                             t.accumulate_grad(ia, ga);
                           }
                           if (t.needs_grad(is)) {
                             Tensor gs(Shape{r});
                             for (int64_t i = 0; i < r; ++i) {
                               real acc = 0;
                               for (int64_t j = 0; j < c; ++j)
                                 acc += g[i * c + j] * av2[i * c + j];
                               gs[i] = acc;
                             }
                             t.accumulate_grad(is, gs);
                           }
                         });
}

// Normalize each row to unit Euclidean norm. Zero rows are rejected rather
// than normalized (quaternion contract).
inline Var normalize_rows(const Var& a) {
  const Tensor& av = a.value();
  require(av.rank() == 2, "normalize_rows: expects rank-2, got ", shape_str(av.shape));
  const int64_t r = av.shape[0], c = av.shape[1];
  Tensor out = av;
  for (int64_t i = 0; i < r; ++i) {
    real n2 = 0;
    for (int64_t j = 0; j < c; ++j) n2 += av[i * c + j] * av[i * c + j];
    require(n2 > 0, "normalize_rows: row ", i, " has zero norm");
    const real inv = real(1) / std::sqrt(n2);
    for (int64_t j = 0; j < c; ++j) out[i * c + j] *= inv;
  }
  // y = x/|x|: dx = (g - y (g.y)) / |x|
  return a.tape().record("normalize_rows", {a}, std::move(out),
                         [ia = a.id(), r, c](Tape& t, const Tensor& g, int out_id) {
                           const Tensor& x = t.value(ia);
                           const Tensor& y = t.value(out_id);
                           Tensor ga(Shape{r, c});
                           for (int64_t i = 0; i < r; ++i) {
                             real n2 = 0, gy = 0;
                             for (int64_t j = 0; j < c; ++j) {
                               n2 += x[i * c + j] * x[i * c + j];
                               gy += g[i * c + j] * y[i * c + j];
                             }
                             const real inv = real(1) / std::sqrt(n2);
                             for (int64_t j = 0; j < c; ++j)
                               ga[i * c + j] = (g[i * c + j] - y[i * c + j] * gy) * inv;
                           }
                           t.accumulate_grad(ia, ga);
                         });
}

// Add a row vector v[C] to every row of a[R,C].
inline Var add_rowvec(const Var& a, const Var& v) {
  const Tensor& av = a.value();
  const Tensor& vv = v.value();
  require(av.rank() == 2 && vv.rank() == 1 && vv.shape[0] == av.shape[1],
          "add_rowvec: expects [R,C] and [C], got ", shape_str(av.shape), " and ",
          shape_str(vv.shape));
  const int64_t r = av.shape[0], c = av.shape[1];
  Tensor out = av;
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out[i * c + j] += vv[j];
  return a.tape().record("add_rowvec", {a, v}, std::move(out),
                         [ia = a.id(), iv = v.id(), r, c](Tape& t, const Tensor& g, int) {
                           t.accumulate_grad(ia, g);
                           if (t.needs_grad(iv)) {
                             Tensor gv(Shape{c});
                             for (int64_t i = 0; i < r; ++i)
                               for (int64_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
                             t.accumulate_grad(iv, gv);
                           }
                         });
}

inline Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const int64_t c = parts.front().value().shape.back();
  int64_t rows = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    require(t.rank() == 2 && t.shape[1] == c, "concat_rows: incompatible shape ",
            shape_str(t.shape));
    rows += t.shape[0];
  }
  Tensor out(Shape{rows, c});
  int64_t at = 0;
  std::vector<int> ids;
  std::vector<int64_t> offsets;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + at * c);
    ids.push_back(p.id());
    offsets.push_back(at);
    at += t.shape[0];
  }
  return parts.front().tape().record(
      "concat_rows", parts, std::move(out),
      [ids, offsets, c](Tape& t, const Tensor& g, int) {
        for (size_t k = 0; k < ids.size(); ++k) {
          const Tensor& v = t.value(ids[k]);
          Tensor gk(v.shape);
          std::copy(g.data.begin() + offsets[k] * c,
                    g.data.begin() + (offsets[k] + v.shape[0]) * c, gk.data.begin());
          t.accumulate_grad(ids[k], gk);
        }
      });
}

inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

// ---------------------------------------------------------------------------
// Image-stack ops ([C,H,W] layout)
// ---------------------------------------------------------------------------

// 2D convolution, zero padding. Output spatial size (H + 2p - kh)/s + 1.
inline Var conv2d(const Var& x, const Var& w, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require(xv.rank() == 3, "conv2d: input must be [C,H,W], got ", shape_str(xv.shape));
  require(wv.rank() == 4, "conv2d: weight must be [Co,Ci,kh,kw], got ", shape_str(wv.shape));
  require(wv.shape[1] == xv.shape[0], "conv2d: channel mismatch: input ",
          shape_str(xv.shape), " weight ", shape_str(wv.shape));
  require(stride >= 1 && pad >= 0, "conv2d: bad stride/pad ", stride, "/", pad);
  const int64_t ci = xv.shape[0], h = xv.shape[1], win = xv.shape[2];
  const int64_t co = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3];
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (win + 2 * pad - kw) / stride + 1;
  require(ho >= 1 && wo >= 1, "conv2d: kernel ", kh, "x", kw, " too large for input ",
          shape_str(xv.shape), " with pad ", pad);
  Tensor out(Shape{co, ho, wo});
  for (int64_t oc = 0; oc < co; ++oc)
    for (int64_t oy = 0; oy < ho; ++oy)
      for (int64_t ox = 0; ox < wo; ++ox) {
        real acc = 0;
        const int64_t iy0 = oy * stride - pad, ix0 = ox * stride - pad;
        for (int64_t ic = 0; ic < ci; ++ic)
          for (int64_t ky = 0; ky < kh; ++ky) {
            const int64_t iy = iy0 + ky;
            if (iy < 0 || iy >= h) continue;
            const real* xrow = &xv.data[static_cast<size_t>((ic * h + iy) * win)];
            const real* wrow = &wv.data[static_cast<size_t>(((oc * ci + ic) * kh + ky) * kw)];
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t ix = ix0 + kx;
              if (ix < 0 || ix >= win) continue;
              acc += xrow[ix] * wrow[kx];
            }
          }
        out[(oc * ho + oy) * wo + ox] = acc;
      }
  return x.tape().record(
      "conv2d", {x, w}, std::move(out),
      [ix_ = x.id(), iw = w.id(), stride, pad, ci, h, win, co, kh, kw, ho,
       wo](Tape& t, const Tensor& g, int) {
        const Tensor& xv2 = t.value(ix_);
        const Tensor& wv2 = t.value(iw);
        if (t.needs_grad(ix_)) {
          Tensor gx(Shape{ci, h, win});
          for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t oy = 0; oy < ho; ++oy)
              for (int64_t ox = 0; ox < wo; ++ox) {
                const real go = g[(oc * ho + oy) * wo + ox];
                if (go == 0) continue;
                const int64_t iy0 = oy * stride - pad, ix0 = ox * stride - pad;
                for (int64_t ic = 0; ic < ci; ++ic)
                  for (int64_t ky = 0; ky < kh; ++ky) {
                    const int64_t iy = iy0 + ky;
                    if (iy < 0 || iy >= h) continue;
                    real* gxrow = &gx.data[static_cast<size_t>((ic * h + iy) * win)];
                    const real* wrow =
                        &wv2.data[static_cast<size_t>(((oc * ci + ic) * kh + ky) * kw)];
                    for (int64_t kx = 0; kx < kw; ++kx) {
                      const int64_t ixp = ix0 + kx;
                      if (ixp < 0 || ixp >= win) continue;
                      gxrow[ixp] += go * wrow[kx];
                    }
                  }
              }
          t.accumulate_grad(ix_, gx);
        }
        if (t.needs_grad(iw)) {
          Tensor gw(Shape{co, ci, kh, kw});
          for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t oy = 0; oy < ho; ++oy)
              for (int64_t ox = 0; ox < wo; ++ox) {
                const real go = g[(oc * ho + oy) * wo + ox];
                if (go == 0) continue;
                const int64_t iy0 = oy * stride - pad, ix0 = ox * stride - pad;
                for (int64_t ic = 0; ic < ci; ++ic)
                  for (int64_t ky = 0; ky < kh; ++ky) {
                    const int64_t iy = iy0 + ky;
                    if (iy < 0 || iy >= h) continue;
                    const real* xrow = &xv2.data[static_cast<size_t>((ic * h + iy) * win)];
                    real* gwrow =
                        &gw.data[static_cast<size_t>(((oc * ci + ic) * kh + ky) * kw)];
                    for (int64_t kx = 0; kx < kw; ++kx) {
                      const int64_t ixp = ix0 + kx;
                      if (ixp < 0 || ixp >= win) continue;
                      gwrow[kx] += go * xrow[ixp];
                    }
                  }
              }
          t.accumulate_grad(iw, gw);
        }
      });
}

// Transposed 2D convolution, no padding. Output spatial size (H-1)*s + kh.
inline Var conv_transpose2d(const Var& x, const Var& w, int stride) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require(xv.rank() == 3, "conv_transpose2d: input must be [C,H,W], got ",
          shape_str(xv.shape));
  require(wv.rank() == 4, "conv_transpose2d: weight must be [Ci,Co,kh,kw], got ",
          shape_str(wv.shape));
  require(wv.shape[0] == xv.shape[0], "conv_transpose2d: channel mismatch: input ",
          shape_str(xv.shape), " weight ", shape_str(wv.shape));
  require(stride >= 1, "conv_transpose2d: bad stride ", stride);
  const int64_t ci = xv.shape[0], h = xv.shape[1], win = xv.shape[2];
  const int64_t co = wv.shape[1], kh = wv.shape[2], kw = wv.shape[3];
  const int64_t ho = (h - 1) * stride + kh;
  const int64_t wo = (win - 1) * stride + kw;
  Tensor out(Shape{co, ho, wo});
  for (int64_t ic = 0; ic < ci; ++ic)
    for (int64_t iy = 0; iy < h; ++iy)
      for (int64_t ixp = 0; ixp < win; ++ixp) {
        const real xval = xv[(ic * h + iy) * win + ixp];
        if (xval == 0) continue;
        for (int64_t oc = 0; oc < co; ++oc) {
          const real* wbase = &wv.data[static_cast<size_t>(((ic * co + oc) * kh) * kw)];
          for (int64_t ky = 0; ky < kh; ++ky) {
            real* orow = &out.data[static_cast<size_t>((oc * ho + iy * stride + ky) * wo +
                                                       ixp * stride)];
            const real* wrow = wbase + ky * kw;
            for (int64_t kx = 0; kx < kw; ++kx) orow[kx] += xval * wrow[kx];
          }
        }
      }
  return x.tape().record(
      "conv_transpose2d", {x, w}, std::move(out),
      [ixd = x.id(), iw = w.id(), stride, ci, h, win, co, kh, kw, ho,
       wo](Tape& t, const Tensor& g, int) {
        const Tensor& xv2 = t.value(ixd);
        const Tensor& wv2 = t.value(iw);
        if (t.needs_grad(ixd)) {
          Tensor gx(Shape{ci, h, win});
          for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t iy = 0; iy < h; ++iy)
              for (int64_t ixp = 0; ixp < win; ++ixp) {
                real acc = 0;
                for (int64_t oc = 0; oc < co; ++oc)
                  for (int64_t ky = 0; ky < kh; ++ky) {
                    const real* grow =
                        &g.data[static_cast<size_t>((oc * ho + iy * stride + ky) * wo +
                                                    ixp * stride)];
                    const real* wrow =
                        &wv2.data[static_cast<size_t>(((ic * co + oc) * kh + ky) * kw)];
                    for (int64_t kx = 0; kx < kw; ++kx) acc += grow[kx] * wrow[kx];
                  }
                gx[(ic * h + iy) * win + ixp] = acc;
              }
          t.accumulate_grad(ixd, gx);
        }
        if (t.needs_grad(iw)) {
          Tensor gw(Shape{ci, co, kh, kw});
          for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t iy = 0; iy < h; ++iy)
              for (int64_t ixp = 0; ixp < win; ++ixp) {
                const real xval = xv2[(ic * h + iy) * win + ixp];
                if (xval == 0) continue;
                for (int64_t oc = 0; oc < co; ++oc)
                  for (int64_t ky = 0; ky < kh; ++ky) {
                    const real* grow =
                        &g.data[static_cast<size_t>((oc * ho + iy * stride + ky) * wo +
                                                    ixp * stride)];
                    real* gwrow =
                        &gw.data[static_cast<size_t>(((ic * co + oc) * kh + ky) * kw)];
                    for (int64_t kx = 0; kx < kw; ++kx) gwrow[kx] += xval * grow[kx];
                  }
              }
          t.accumulate_grad(iw, gw);
        }
      });
}

// Per-channel bias for [C,H,W] stacks.
inline Var add_channel_bias(const Var& x, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  require(xv.rank() == 3 && bv.rank() == 1 && bv.shape[0] == xv.shape[0],
          "add_channel_bias: expects [C,H,W] and [C], got ", shape_str(xv.shape),
          " and ", shape_str(bv.shape));
  const int64_t c = xv.shape[0], hw = xv.shape[1] * xv.shape[2];
  Tensor out = xv;
  for (int64_t ic = 0; ic < c; ++ic)
    for (int64_t i = 0; i < hw; ++i) out[ic * hw + i] += bv[ic];
  return x.tape().record("add_channel_bias", {x, b}, std::move(out),
                         [ixd = x.id(), ib = b.id(), c, hw](Tape& t, const Tensor& g, int) {
                           t.accumulate_grad(ixd, g);
                           if (t.needs_grad(ib)) {
                             Tensor gb(Shape{c});
                             for (int64_t ic = 0; ic < c; ++ic) {
                               real acc = 0;
                               for (int64_t i = 0; i < hw; ++i) acc += g[ic * hw + i];
                               gb[ic] = acc;
                             }
                             t.accumulate_grad(ib, gb);
                           }
                         });
}

inline Var global_avg_pool(const Var& x) {
  const Tensor& xv = x.value();
  require(xv.rank() == 3, "global_avg_pool: expects [C,H,W], got ", shape_str(xv.shape));
  const int64_t c = xv.shape[0], hw = xv.shape[1] * xv.shape[2];
  Tensor out(Shape{c});
  for (int64_t ic = 0; ic < c; ++ic) {
    real acc = 0;
    for (int64_t i = 0; i < hw; ++i) acc += xv[ic * hw + i];
    out[ic] = acc / static_cast<real>(hw);
  }
  return x.tape().record("global_avg_pool", {x}, std::move(out),
                         [ixd = x.id(), c, hw](Tape& t, const Tensor& g, int) {
                           Tensor gx(t.value(ixd).shape);
                           for (int64_t ic = 0; ic < c; ++ic) {
                             const real v = g[ic] / static_cast<real>(hw);
                             for (int64_t i = 0; i < hw; ++i) gx[ic * hw + i] = v;
                           }
                           t.accumulate_grad(ixd, gx);
                         });
}

// Softmax over all pixels of one [H,W] map; subtracts the max before
// exponentiation for overflow safety.
inline Var spatial_softmax(const Var& x) {
  const Tensor& xv = x.value();
  require(xv.rank() == 2, "spatial_softmax: expects [H,W], got ", shape_str(xv.shape));
  real mx = xv[0];
  for (real v : xv.data) mx = std::max(mx, v);
  Tensor out = xv;
  real z = 0;
  for (real& v : out.data) {
    v = std::exp(v - mx);
    z += v;
  }
  for (real& v : out.data) v /= z;
  // dx = y * (g - sum(g*y))
  return x.tape().record("spatial_softmax", {x}, std::move(out),
                         [ixd = x.id()](Tape& t, const Tensor& g, int out_id) {
                           const Tensor& y = t.value(out_id);
                           real gy = 0;
                           for (int64_t i = 0; i < g.numel(); ++i) gy += g[i] * y[i];
                           Tensor gx = g;
                           for (int64_t i = 0; i < g.numel(); ++i)
                             gx[i] = y[i] * (g[i] - gy);
                           t.accumulate_grad(ixd, gx);
                         });
}

inline Var concat_channels(std::span<const Var> parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  const Tensor& first = parts.front().value();
  require(first.rank() == 3, "concat_channels: expects [C,H,W], got ",
          shape_str(first.shape));
  const int64_t h = first.shape[1], w = first.shape[2];
  int64_t ctot = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    require(t.rank() == 3 && t.shape[1] == h && t.shape[2] == w,
            "concat_channels: incompatible shape ", shape_str(t.shape));
    ctot += t.shape[0];
  }
  Tensor out(Shape{ctot, h, w});
  int64_t at = 0;
  std::vector<int> ids;
  std::vector<int64_t> offsets;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + at * h * w);
    ids.push_back(p.id());
    offsets.push_back(at);
    at += t.shape[0];
  }
  return parts.front().tape().record(
      "concat_channels", parts, std::move(out),
      [ids, offsets, h, w](Tape& t, const Tensor& g, int) {
        for (size_t k = 0; k < ids.size(); ++k) {
          const Tensor& v = t.value(ids[k]);
          Tensor gk(v.shape);
          std::copy(g.data.begin() + offsets[k] * h * w,
                    g.data.begin() + (offsets[k] + v.shape[0]) * h * w, gk.data.begin());
          t.accumulate_grad(ids[k], gk);
        }
      });
}

inline Var concat_channels(std::initializer_list<Var> parts) {
  return concat_channels(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var slice_channels(const Var& x, int64_t from, int64_t count) {
  const Tensor& xv = x.value();
  require(xv.rank() == 3, "slice_channels: expects [C,H,W], got ", shape_str(xv.shape));
  require(from >= 0 && count >= 1 && from + count <= xv.shape[0],
          "slice_channels: range [", from, ",", from + count, ") out of ",
          xv.shape[0], " channels");
  const int64_t h = xv.shape[1], w = xv.shape[2];
  Tensor out(Shape{count, h, w});
  std::copy(xv.data.begin() + from * h * w, xv.data.begin() + (from + count) * h * w,
            out.data.begin());
  return x.tape().record("slice_channels", {x}, std::move(out),
                         [ixd = x.id(), from, count, h, w](Tape& t, const Tensor& g, int) {
                           Tensor gx(t.value(ixd).shape);
                           std::copy(g.data.begin(), g.data.end(),
                                     gx.data.begin() + from * h * w);
                           t.accumulate_grad(ixd, gx);
                         });
}

}  // namespace derender::ad
