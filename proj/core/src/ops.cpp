/* Copyright 2026 The SpeechSwin Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "speechswin/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace speechswin {
namespace ops {
namespace {

#if !defined(NDEBUG)
#define SPEECHSWIN_CHECK_FINITE 1
#endif

template <typename T>
void debug_check_finite(const Tensor<T>& t, const char* op) {
#ifdef SPEECHSWIN_CHECK_FINITE
  for (int64_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t.data()[i])) {
      throw std::logic_error(std::string(op) + ": non-finite output value");
    }
  }
#else
  (void)t;
  (void)op;
#endif
}

template <typename T>
using ConstMat = Eigen::Map<
    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using MutMat =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int normalize_axis(int axis, int ndim, const char* op) {
  int a = axis < 0 ? axis + ndim : axis;
  if (a < 0 || a >= ndim) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(ndim));
  }
  return a;
}

template <typename T>
Tape<T>* common_tape(std::initializer_list<const Tensor<T>*> ts) {
  Tape<T>* tape = nullptr;
  for (const Tensor<T>* t : ts) {
    if (t->tape() == nullptr) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw std::logic_error("operands are tracked on different tapes");
    }
  }
  return tape;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const int nd = static_cast<int>(std::max(a.size(), b.size()));
  Shape out(nd);
  for (int i = 0; i < nd; ++i) {
    const int ai = static_cast<int>(a.size()) - nd + i;
    const int bi = static_cast<int>(b.size()) - nd + i;
    const int64_t da = ai < 0 ? 1 : a[ai];
    const int64_t db = bi < 0 ? 1 : b[bi];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " are not broadcastable");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Element strides of `shape` right-aligned into a rank-`nd` frame, with 0
// for broadcast dimensions.
Shape broadcast_strides(const Shape& shape, int nd) {
  Shape strides(nd, 0);
  Shape own = row_major_strides(shape);
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    const int oi = nd - static_cast<int>(shape.size()) + i;
    strides[oi] = shape[i] == 1 ? 0 : own[i];
  }
  return strides;
}

template <typename T, typename F>
void broadcast_binary(const T* a, const Shape& ashape, const T* b,
                      const Shape& bshape, T* out, const Shape& oshape, F f) {
  const int nd = static_cast<int>(oshape.size());
  const int64_t n = shape_numel(oshape);
  const Shape astr = broadcast_strides(ashape, nd);
  const Shape bstr = broadcast_strides(bshape, nd);
  Shape coord(nd, 0);
  int64_t ai = 0, bi = 0;
  for (int64_t i = 0; i < n; ++i) {
    out[i] = f(a[ai], b[bi]);
    for (int d = nd - 1; d >= 0; --d) {
      ++coord[d];
      ai += astr[d];
      bi += bstr[d];
      if (coord[d] < oshape[d]) break;
      coord[d] = 0;
      ai -= astr[d] * oshape[d];
      bi -= bstr[d] * oshape[d];
    }
  }
}

// Sum-reduces a gradient of shape gshape down to tshape (inverse broadcast).
template <typename T>
std::vector<T> reduce_to_shape(const std::vector<T>& g, const Shape& gshape,
                               const Shape& tshape) {
  if (gshape == tshape) return g;
  const int nd = static_cast<int>(gshape.size());
  std::vector<T> out(shape_numel(tshape), T(0));
  const Shape tstr = broadcast_strides(tshape, nd);
  Shape coord(nd, 0);
  int64_t ti = 0;
  const int64_t n = static_cast<int64_t>(g.size());
  for (int64_t i = 0; i < n; ++i) {
    out[ti] += g[i];
    for (int d = nd - 1; d >= 0; --d) {
      ++coord[d];
      ti += tstr[d];
      if (coord[d] < gshape[d]) break;
      coord[d] = 0;
      ti -= tstr[d] * gshape[d];
    }
  }
  return out;
}

template <typename T>
void permute_raw(const T* src, const Shape& sshape, const std::vector<int>& perm,
                 T* dst) {
  const int nd = static_cast<int>(sshape.size());
  Shape oshape(nd);
  for (int i = 0; i < nd; ++i) oshape[i] = sshape[perm[i]];
  const Shape sstr = row_major_strides(sshape);
  Shape step(nd);
  for (int i = 0; i < nd; ++i) step[i] = sstr[perm[i]];
  Shape coord(nd, 0);
  int64_t si = 0;
  const int64_t n = shape_numel(sshape);
  for (int64_t i = 0; i < n; ++i) {
    dst[i] = src[si];
    for (int d = nd - 1; d >= 0; --d) {
      ++coord[d];
      si += step[d];
      if (coord[d] < oshape[d]) break;
      coord[d] = 0;
      si -= step[d] * oshape[d];
    }
  }
}

template <typename T>
void roll_raw(const T* src, int64_t outer, int64_t len, int64_t inner,
              int64_t shift, T* dst) {
  for (int64_t o = 0; o < outer; ++o) {
    const T* s = src + o * len * inner;
    T* d = dst + o * len * inner;
    for (int64_t j = 0; j < len; ++j) {
      const int64_t sj = (j + shift) % len;
      std::copy(s + sj * inner, s + (sj + 1) * inner, d + j * inner);
    }
  }
}

struct AxisSplit {
  int64_t outer, len, inner;
};

AxisSplit split_at(const Shape& shape, int axis) {
  AxisSplit s{1, shape[axis], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i)
    s.inner *= shape[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape oshape = broadcast_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(oshape);
  if (a.shape() == b.shape()) {
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.mutable_data();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  } else {
    broadcast_binary(a.data(), a.shape(), b.data(), b.shape(),
                     out.mutable_data(), oshape,
                     [](T x, T y) { return x + y; });
  }
  debug_check_finite(out, "add");

  Tape<T>* tape = common_tape<T>({&a, &b});
  if (tape) {
    const int na = a.requires_grad() ? a.node() : -1;
    const int nb = b.requires_grad() ? b.node() : -1;
    std::vector<int> parents;
    if (na >= 0) parents.push_back(na);
    if (nb >= 0) parents.push_back(nb);
    Shape as = a.shape(), bs = b.shape(), os = oshape;
    int id = tape->record(
        parents, out.numel(), [na, nb, as, bs, os](Tape<T>& tp, int self) {
          const std::vector<T>& g = tp.output_grad(self);
          if (na >= 0) {
            std::vector<T> ra = reduce_to_shape(g, os, as);
            tp.accumulate(na, ra.data(), static_cast<int64_t>(ra.size()));
          }
          if (nb >= 0) {
            std::vector<T> rb = reduce_to_shape(g, os, bs);
            tp.accumulate(nb, rb.data(), static_cast<int64_t>(rb.size()));
          }
        });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.mutable_data();
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = px[i] * s;
  debug_check_finite(out, "scale");

  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    int id = tape->record({nx}, out.numel(), [nx, s](Tape<T>& tp, int self) {
      const std::vector<T>& g = tp.output_grad(self);
      std::vector<T>& gx = tp.grad_buffer(nx);
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
    });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, T alpha) {
  if (a.ndim() < 2 || b.ndim() < 2) {
    throw ShapeError("matmul: operands must have rank >= 2, got " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int64_t m = a.dim(-2), p = a.dim(-1);
  const int64_t pb = b.dim(-2), n = b.dim(-1);
  if (p != pb) {
    throw ShapeError("matmul: inner dimensions disagree: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Shape abatch(a.shape().begin(), a.shape().end() - 2);
  Shape bbatch(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  if (abatch == bbatch) {
    batch = abatch;
  } else if (abatch.empty()) {
    batch = bbatch;
  } else if (bbatch.empty()) {
    batch = abatch;
  } else {
    throw ShapeError("matmul: batch dimensions must match or one operand must "
                     "be a plain matrix: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int64_t nb = std::max<int64_t>(shape_numel(batch), 1);
  const int64_t astep = abatch.empty() ? 0 : m * p;
  const int64_t bstep = bbatch.empty() ? 0 : p * n;

  Shape oshape = batch;
  oshape.push_back(m);
  oshape.push_back(n);
  Tensor<T> out(oshape);
  {
    const T* pa = a.data();
    const T* pbm = b.data();
    T* po = out.mutable_data();
    for (int64_t i = 0; i < nb; ++i) {
      ConstMat<T> A(pa + i * astep, m, p);
      ConstMat<T> B(pbm + i * bstep, p, n);
      MutMat<T> C(po + i * m * n, m, n);
      C.noalias() = alpha * (A * B);
    }
  }
  debug_check_finite(out, "matmul");

  Tape<T>* tape = common_tape<T>({&a, &b});
  if (tape) {
    const int na = a.requires_grad() ? a.node() : -1;
    const int nbn = b.requires_grad() ? b.node() : -1;
    std::vector<int> parents;
    if (na >= 0) parents.push_back(na);
    if (nbn >= 0) parents.push_back(nbn);
    auto sa = a.storage();
    auto sb = b.storage();
    int id = tape->record(
        parents, out.numel(),
        [na, nbn, sa, sb, m, p, n, nb, astep, bstep, alpha](Tape<T>& tp,
                                                            int self) {
          const std::vector<T>& g = tp.output_grad(self);
          if (na >= 0) {
            std::vector<T>& ga = tp.grad_buffer(na);
            for (int64_t i = 0; i < nb; ++i) {
              ConstMat<T> G(g.data() + i * m * n, m, n);
              ConstMat<T> B(sb->data() + i * bstep, p, n);
              MutMat<T> GA(ga.data() + i * astep, m, p);
              GA.noalias() += alpha * (G * B.transpose());
            }
          }
          if (nbn >= 0) {
            std::vector<T>& gb = tp.grad_buffer(nbn);
            for (int64_t i = 0; i < nb; ++i) {
              ConstMat<T> G(g.data() + i * m * n, m, n);
              ConstMat<T> A(sa->data() + i * astep, m, p);
              MutMat<T> GB(gb.data() + i * bstep, p, n);
              GB.noalias() += alpha * (A.transpose() * G);
            }
          }
        });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.ndim() != 2) {
    throw ShapeError("linear: weight must be rank 2, got " + shape_str(w.shape()));
  }
  const int64_t in = w.dim(0), outd = w.dim(1);
  if (x.dim(-1) != in) {
    throw ShapeError("linear: input " + shape_str(x.shape()) +
                     " does not match weight " + shape_str(w.shape()));
  }
  if (b.numel() != outd) {
    throw ShapeError("linear: bias " + shape_str(b.shape()) +
                     " does not match weight " + shape_str(w.shape()));
  }
  const int64_t rows = x.numel() / in;
  Shape oshape(x.shape().begin(), x.shape().end() - 1);
  oshape.push_back(outd);
  Tensor<T> out(oshape);
  {
    ConstMat<T> X(x.data(), rows, in);
    ConstMat<T> W(w.data(), in, outd);
    MutMat<T> Y(out.mutable_data(), rows, outd);
    Y.noalias() = X * W;
    ConstMat<T> bias(b.data(), 1, outd);
    Y.rowwise() += bias.row(0);
  }
  debug_check_finite(out, "linear");

  Tape<T>* tape = common_tape<T>({&x, &w, &b});
  if (tape) {
    const int nx = x.requires_grad() ? x.node() : -1;
    const int nw = w.requires_grad() ? w.node() : -1;
    const int nbias = b.requires_grad() ? b.node() : -1;
    std::vector<int> parents;
    for (int nn : {nx, nw, nbias})
      if (nn >= 0) parents.push_back(nn);
    auto sx = x.storage();
    auto sw = w.storage();
    int id = tape->record(
        parents, out.numel(),
        [nx, nw, nbias, sx, sw, rows, in, outd](Tape<T>& tp, int self) {
          const std::vector<T>& g = tp.output_grad(self);
          ConstMat<T> G(g.data(), rows, outd);
          if (nx >= 0) {
            ConstMat<T> W(sw->data(), in, outd);
            MutMat<T> GX(tp.grad_buffer(nx).data(), rows, in);
            GX.noalias() += G * W.transpose();
          }
          if (nw >= 0) {
            ConstMat<T> X(sx->data(), rows, in);
            MutMat<T> GW(tp.grad_buffer(nw).data(), in, outd);
            GW.noalias() += X.transpose() * G;
          }
          if (nbias >= 0) {
            std::vector<T>& gb = tp.grad_buffer(nbias);
            for (int64_t r = 0; r < rows; ++r) {
              for (int64_t j = 0; j < outd; ++j) gb[j] += g[r * outd + j];
            }
          }
        });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  const int64_t e = x.dim(-1);
  if (e == 0) throw ShapeError("layer_norm: empty normalization axis");
  if (gamma.numel() != e || beta.numel() != e) {
    throw ShapeError("layer_norm: gamma/beta of shapes " +
                     shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                     " do not match axis length " + std::to_string(e));
  }
  if (eps <= T(0)) throw ShapeError("layer_norm: eps must be positive");
  const int64_t rows = x.numel() / e;

  Tensor<T> out(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  {
    const T* px = x.data();
    const T* pg = gamma.data();
    const T* pb = beta.data();
    T* po = out.mutable_data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* xr = px + r * e;
      double sum = 0;
      for (int64_t j = 0; j < e; ++j) sum += xr[j];
      const double mu = sum / static_cast<double>(e);
      double var = 0;
      for (int64_t j = 0; j < e; ++j) {
        const double d = xr[j] - mu;
        var += d * d;
      }
      var /= static_cast<double>(e);
      const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*inv_std)[r] = istd;
      for (int64_t j = 0; j < e; ++j) {
        const T xh = (xr[j] - static_cast<T>(mu)) * istd;
        (*xhat)[r * e + j] = xh;
        po[r * e + j] = pg[j] * xh + pb[j];
      }
    }
  }
  debug_check_finite(out, "layer_norm");

  Tape<T>* tape = common_tape<T>({&x, &gamma, &beta});
  if (tape) {
    const int nx = x.requires_grad() ? x.node() : -1;
    const int ng = gamma.requires_grad() ? gamma.node() : -1;
    const int nbeta = beta.requires_grad() ? beta.node() : -1;
    std::vector<int> parents;
    for (int nn : {nx, ng, nbeta})
      if (nn >= 0) parents.push_back(nn);
    auto sg = gamma.storage();
    int id = tape->record(
        parents, out.numel(),
        [nx, ng, nbeta, sg, xhat, inv_std, rows, e](Tape<T>& tp, int self) {
          const std::vector<T>& g = tp.output_grad(self);
          if (nx >= 0) {
            std::vector<T>& gx = tp.grad_buffer(nx);
            const T* pg = sg->data();
            for (int64_t r = 0; r < rows; ++r) {
              const T* gr = g.data() + r * e;
              const T* xh = xhat->data() + r * e;
              double mean_dxh = 0, mean_dxh_xh = 0;
              for (int64_t j = 0; j < e; ++j) {
                const double dxh = static_cast<double>(gr[j]) * pg[j];
                mean_dxh += dxh;
                mean_dxh_xh += dxh * xh[j];
              }
              mean_dxh /= static_cast<double>(e);
              mean_dxh_xh /= static_cast<double>(e);
              const T istd = (*inv_std)[r];
              for (int64_t j = 0; j < e; ++j) {
                const double dxh = static_cast<double>(gr[j]) * pg[j];
                gx[r * e + j] += istd * static_cast<T>(dxh - mean_dxh -
                                                       xh[j] * mean_dxh_xh);
              }
            }
          }
          if (ng >= 0) {
            std::vector<T>& gg = tp.grad_buffer(ng);
            for (int64_t r = 0; r < rows; ++r) {
              for (int64_t j = 0; j < e; ++j) {
                gg[j] += g[r * e + j] * (*xhat)[r * e + j];
              }
            }
          }
          if (nbeta >= 0) {
            std::vector<T>& gb = tp.grad_buffer(nbeta);
            for (int64_t r = 0; r < rows; ++r) {
              for (int64_t j = 0; j < e; ++j) gb[j] += g[r * e + j];
            }
          }
        });
    out.attach_(tape, id);
  }
  return out;
}

namespace {

// Shared softmax forward/backward over (outer, len, inner) lanes with an
// optional additive mask selected per lane.
template <typename T>
void softmax_lanes(const T* x, T* probs, int64_t outer, int64_t len,
                   int64_t inner,
                   const std::function<const T*(int64_t, int64_t)>& mask_row) {
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      const T* mrow = mask_row ? mask_row(o, in) : nullptr;
      T mx = x[base] + (mrow ? mrow[0] : T(0));
      for (int64_t j = 1; j < len; ++j) {
        const T v = x[base + j * inner] + (mrow ? mrow[j] : T(0));
        if (v > mx) mx = v;
      }
      double sum = 0;
      for (int64_t j = 0; j < len; ++j) {
        const T v = x[base + j * inner] + (mrow ? mrow[j] : T(0));
        const T ev = std::exp(v - mx);
        probs[base + j * inner] = ev;
        sum += ev;
      }
      const T inv = static_cast<T>(1.0 / sum);
      for (int64_t j = 0; j < len; ++j) probs[base + j * inner] *= inv;
    }
  }
}

template <typename T>
void softmax_backward_lanes(const std::vector<T>& g,
                            const std::vector<T>& probs, std::vector<T>& gx,
                            int64_t outer, int64_t len, int64_t inner) {
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      double dot = 0;
      for (int64_t j = 0; j < len; ++j) {
        dot += static_cast<double>(g[base + j * inner]) * probs[base + j * inner];
      }
      for (int64_t j = 0; j < len; ++j) {
        const int64_t k = base + j * inner;
        gx[k] += probs[k] * (g[k] - static_cast<T>(dot));
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int a = normalize_axis(axis, x.ndim(), "softmax");
  const AxisSplit s = split_at(x.shape(), a);
  Tensor<T> out(x.shape());
  softmax_lanes<T>(x.data(), out.mutable_data(), s.outer, s.len, s.inner,
                   nullptr);
  debug_check_finite(out, "softmax");

  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    auto probs = out.storage();
    int id = tape->record({nx}, out.numel(), [nx, probs, s](Tape<T>& tp, int self) {
      softmax_backward_lanes(tp.output_grad(self), *probs, tp.grad_buffer(nx),
                             s.outer, s.len, s.inner);
    });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> masked_window_softmax(const Tensor<T>& scores, const Tensor<T>& mask) {
  if (scores.ndim() != 4 || mask.ndim() != 3) {
    throw ShapeError("masked_window_softmax: expected scores (B*M, h, L, L) and "
                     "mask (M, L, L), got " +
                     shape_str(scores.shape()) + " and " + shape_str(mask.shape()));
  }
  const int64_t bm = scores.dim(0), heads = scores.dim(1), L = scores.dim(2);
  const int64_t M = mask.dim(0);
  if (scores.dim(3) != L || mask.dim(1) != L || mask.dim(2) != L || bm % M != 0) {
    throw ShapeError("masked_window_softmax: inconsistent shapes " +
                     shape_str(scores.shape()) + " and " + shape_str(mask.shape()));
  }
  if (mask.requires_grad()) {
    throw std::logic_error("masked_window_softmax: mask must be untracked");
  }

  Tensor<T> out(scores.shape());
  {
    const T* px = scores.data();
    const T* pm = mask.data();
    T* po = out.mutable_data();
    // One lane per (window-batch, head, query-row).
    const int64_t outer = bm * heads * L;
    std::function<const T*(int64_t, int64_t)> mask_row =
        [pm, heads, L, M](int64_t o, int64_t) -> const T* {
      const int64_t w = (o / (heads * L)) % M;
      const int64_t row = o % L;
      return pm + (w * L + row) * L;
    };
    softmax_lanes<T>(px, po, outer, L, 1, mask_row);
  }
  debug_check_finite(out, "masked_window_softmax");

  if (scores.requires_grad()) {
    Tape<T>* tape = scores.tape();
    const int nx = scores.node();
    auto probs = out.storage();
    const int64_t outer = bm * heads * L;
    int id = tape->record({nx}, out.numel(),
                          [nx, probs, outer, L](Tape<T>& tp, int self) {
                            softmax_backward_lanes(tp.output_grad(self), *probs,
                                                   tp.grad_buffer(nx), outer, L, 1);
                          });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  Tensor<T> out(x.shape());
  {
    const T* px = x.data();
    T* po = out.mutable_data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) {
      const double v = px[i];
      po[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
    }
  }
  debug_check_finite(out, "gelu");

  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    auto sx = x.storage();
    int id = tape->record({nx}, out.numel(), [nx, sx](Tape<T>& tp, int self) {
      constexpr double kInvSqrt2Pi = 0.3989422804014326779;
      const std::vector<T>& g = tp.output_grad(self);
      std::vector<T>& gx = tp.grad_buffer(nx);
      for (size_t i = 0; i < g.size(); ++i) {
        const double v = (*sx)[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        gx[i] += g[i] * static_cast<T>(cdf + v * pdf);
      }
    });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> mean_pool(const Tensor<T>& x, int axis) {
  const int a = normalize_axis(axis, x.ndim(), "mean_pool");
  const AxisSplit s = split_at(x.shape(), a);
  if (s.len == 0) throw ShapeError("mean_pool: empty axis");
  Shape oshape;
  for (int i = 0; i < x.ndim(); ++i) {
    if (i != a) oshape.push_back(x.shape()[i]);
  }
  if (oshape.empty()) oshape = {1};

  Tensor<T> out(oshape);
  {
    const T* px = x.data();
    T* po = out.mutable_data();
    std::vector<double> acc(s.inner);
    for (int64_t o = 0; o < s.outer; ++o) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int64_t j = 0; j < s.len; ++j) {
        const T* row = px + (o * s.len + j) * s.inner;
        for (int64_t in = 0; in < s.inner; ++in) acc[in] += row[in];
      }
      for (int64_t in = 0; in < s.inner; ++in) {
        po[o * s.inner + in] = static_cast<T>(acc[in] / static_cast<double>(s.len));
      }
    }
  }
  debug_check_finite(out, "mean_pool");

  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    int id = tape->record({nx}, out.numel(), [nx, s](Tape<T>& tp, int self) {
      const std::vector<T>& g = tp.output_grad(self);
      std::vector<T>& gx = tp.grad_buffer(nx);
      const T inv = T(1) / static_cast<T>(s.len);
      for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t j = 0; j < s.len; ++j) {
          T* row = gx.data() + (o * s.len + j) * s.inner;
          const T* go = g.data() + o * s.inner;
          for (int64_t in = 0; in < s.inner; ++in) row[in] += go[in] * inv;
        }
      }
    });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw ShapeError("reshape: element count mismatch: " + shape_str(x.shape()) +
                     " -> " + shape_str(new_shape));
  }
  Tensor<T> out(std::move(new_shape), x.storage());
  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    int id = tape->record({nx}, out.numel(), [nx](Tape<T>& tp, int self) {
      const std::vector<T>& g = tp.output_grad(self);
      tp.accumulate(nx, g.data(), static_cast<int64_t>(g.size()));
    });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
  const int nd = x.ndim();
  if (static_cast<int>(perm.size()) != nd) {
    throw ShapeError("permute: perm rank " + std::to_string(perm.size()) +
                     " does not match tensor rank " + std::to_string(nd));
  }
  std::vector<bool> seen(nd, false);
  for (int p : perm) {
    if (p < 0 || p >= nd || seen[p]) {
      throw ShapeError("permute: invalid permutation");
    }
    seen[p] = true;
  }
  Shape oshape(nd);
  for (int i = 0; i < nd; ++i) oshape[i] = x.shape()[perm[i]];
  Tensor<T> out(oshape);
  permute_raw(x.data(), x.shape(), perm, out.mutable_data());

  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    std::vector<int> inv(nd);
    for (int i = 0; i < nd; ++i) inv[perm[i]] = i;
    int id = tape->record({nx}, out.numel(),
                          [nx, inv, oshape](Tape<T>& tp, int self) {
                            const std::vector<T>& g = tp.output_grad(self);
                            std::vector<T> tmp(g.size());
                            permute_raw(g.data(), oshape, inv, tmp.data());
                            tp.accumulate(nx, tmp.data(),
                                          static_cast<int64_t>(tmp.size()));
                          });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, int axis, const std::vector<int64_t>& idx) {
  const int a = normalize_axis(axis, x.ndim(), "gather");
  const AxisSplit s = split_at(x.shape(), a);
  for (int64_t i : idx) {
    if (i < 0 || i >= s.len) {
      throw ShapeError("gather: index " + std::to_string(i) +
                       " out of range for axis length " + std::to_string(s.len));
    }
  }
  Shape oshape = x.shape();
  oshape[a] = static_cast<int64_t>(idx.size());
  Tensor<T> out(oshape);
  {
    const T* px = x.data();
    T* po = out.mutable_data();
    const int64_t olen = static_cast<int64_t>(idx.size());
    for (int64_t o = 0; o < s.outer; ++o) {
      for (int64_t j = 0; j < olen; ++j) {
        const T* src = px + (o * s.len + idx[j]) * s.inner;
        std::copy(src, src + s.inner, po + (o * olen + j) * s.inner);
      }
    }
  }

  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    int id = tape->record({nx}, out.numel(), [nx, s, idx](Tape<T>& tp, int self) {
      const std::vector<T>& g = tp.output_grad(self);
      std::vector<T>& gx = tp.grad_buffer(nx);
      const int64_t olen = static_cast<int64_t>(idx.size());
      for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t j = 0; j < olen; ++j) {
          const T* go = g.data() + (o * olen + j) * s.inner;
          T* dst = gx.data() + (o * s.len + idx[j]) * s.inner;
          for (int64_t in = 0; in < s.inner; ++in) dst[in] += go[in];
        }
      }
    });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const int nd = xs[0].ndim();
  const int a = normalize_axis(axis, nd, "concat");
  int64_t total = 0;
  for (const Tensor<T>& t : xs) {
    if (t.ndim() != nd) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < nd; ++i) {
      if (i != a && t.shape()[i] != xs[0].shape()[i]) {
        throw ShapeError("concat: shapes " + shape_str(xs[0].shape()) + " and " +
                         shape_str(t.shape()) + " differ off-axis");
      }
    }
    total += t.shape()[a];
  }
  Shape oshape = xs[0].shape();
  oshape[a] = total;
  Tensor<T> out(oshape);
  const AxisSplit so = split_at(oshape, a);
  {
    T* po = out.mutable_data();
    int64_t off = 0;
    for (const Tensor<T>& t : xs) {
      const int64_t len = t.shape()[a];
      const T* px = t.data();
      for (int64_t o = 0; o < so.outer; ++o) {
        std::copy(px + o * len * so.inner, px + (o + 1) * len * so.inner,
                  po + (o * total + off) * so.inner);
      }
      off += len;
    }
  }

  Tape<T>* tape = nullptr;
  for (const Tensor<T>& t : xs) {
    if (t.tape()) {
      if (tape && tape != t.tape()) {
        throw std::logic_error("operands are tracked on different tapes");
      }
      tape = t.tape();
    }
  }
  if (tape) {
    std::vector<int> nodes(xs.size(), -1);
    std::vector<int64_t> lens(xs.size());
    std::vector<int> parents;
    for (size_t i = 0; i < xs.size(); ++i) {
      lens[i] = xs[i].shape()[a];
      if (xs[i].requires_grad()) {
        nodes[i] = xs[i].node();
        parents.push_back(nodes[i]);
      }
    }
    int id = tape->record(
        parents, out.numel(), [nodes, lens, so, total](Tape<T>& tp, int self) {
          const std::vector<T>& g = tp.output_grad(self);
          int64_t off = 0;
          for (size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i] >= 0) {
              std::vector<T>& gx = tp.grad_buffer(nodes[i]);
              for (int64_t o = 0; o < so.outer; ++o) {
                const T* src = g.data() + (o * total + off) * so.inner;
                T* dst = gx.data() + o * lens[i] * so.inner;
                for (int64_t k = 0; k < lens[i] * so.inner; ++k) dst[k] += src[k];
              }
            }
            off += lens[i];
          }
        });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> roll(const Tensor<T>& x, int64_t shift, int axis) {
  const int a = normalize_axis(axis, x.ndim(), "roll");
  const AxisSplit s = split_at(x.shape(), a);
  const int64_t sh = ((shift % s.len) + s.len) % s.len;
  Tensor<T> out(x.shape());
  roll_raw(x.data(), s.outer, s.len, s.inner, sh, out.mutable_data());

  if (x.requires_grad()) {
    Tape<T>* tape = x.tape();
    const int nx = x.node();
    int id = tape->record({nx}, out.numel(), [nx, s, sh](Tape<T>& tp, int self) {
      const std::vector<T>& g = tp.output_grad(self);
      std::vector<T> tmp(g.size());
      roll_raw(g.data(), s.outer, s.len, s.inner, (s.len - sh) % s.len,
               tmp.data());
      tp.accumulate(nx, tmp.data(), static_cast<int64_t>(tmp.size()));
    });
    out.attach_(tape, id);
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits,
                        const std::vector<int64_t>& labels) {
  if (logits.ndim() != 2) {
    throw ShapeError("cross_entropy: logits must be (batch, classes), got " +
                     shape_str(logits.shape()));
  }
  const int64_t b = logits.dim(0), k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != b) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(b));
  }
  for (int64_t y : labels) {
    if (y < 0 || y >= k) {
      throw ShapeError("cross_entropy: label " + std::to_string(y) +
                       " out of range for " + std::to_string(k) + " classes");
    }
  }

  auto probs = std::make_shared<std::vector<T>>(b * k);
  double loss = 0;
  {
    const T* pl = logits.data();
    for (int64_t i = 0; i < b; ++i) {
      const T* row = pl + i * k;
      double mx = row[0];
      for (int64_t j = 1; j < k; ++j) mx = std::max<double>(mx, row[j]);
      double se = 0;
      for (int64_t j = 0; j < k; ++j) se += std::exp(row[j] - mx);
      const double lse = mx + std::log(se);
      for (int64_t j = 0; j < k; ++j) {
        (*probs)[i * k + j] = static_cast<T>(std::exp(row[j] - lse));
      }
      loss += lse - row[labels[i]];
    }
    loss /= static_cast<double>(b);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(loss));
  debug_check_finite(out, "cross_entropy");

  if (logits.requires_grad()) {
    Tape<T>* tape = logits.tape();
    const int nx = logits.node();
    int id = tape->record({nx}, 1, [nx, probs, labels, b, k](Tape<T>& tp, int self) {
      const T g0 = tp.output_grad(self)[0];
      std::vector<T>& gx = tp.grad_buffer(nx);
      const T invb = g0 / static_cast<T>(b);
      for (int64_t i = 0; i < b; ++i) {
        for (int64_t j = 0; j < k; ++j) {
          const T onehot = labels[i] == j ? T(1) : T(0);
          gx[i * k + j] += ((*probs)[i * k + j] - onehot) * invb;
        }
      }
    });
    out.attach_(tape, id);
  }
  return out;
}

#define SPEECHSWIN_INSTANTIATE_OPS(T)                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> scale(const Tensor<T>&, T);                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, T);            \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&,                \
                            const Tensor<T>&);                                 \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,            \
                                const Tensor<T>&, T);                          \
  template Tensor<T> softmax(const Tensor<T>&, int);                           \
  template Tensor<T> masked_window_softmax(const Tensor<T>&, const Tensor<T>&);\
  template Tensor<T> gelu(const Tensor<T>&);                                   \
  template Tensor<T> mean_pool(const Tensor<T>&, int);                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                         \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);       \
  template Tensor<T> gather(const Tensor<T>&, int, const std::vector<int64_t>&); \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);               \
  template Tensor<T> roll(const Tensor<T>&, int64_t, int);                     \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<int64_t>&);

SPEECHSWIN_INSTANTIATE_OPS(float)
SPEECHSWIN_INSTANTIATE_OPS(double)

#undef SPEECHSWIN_INSTANTIATE_OPS

}  // namespace ops
}  // namespace speechswin
