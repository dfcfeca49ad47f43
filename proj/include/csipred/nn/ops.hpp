#pragma once

// The fixed autodiff op set: matmul (with optional transposed RHS), add/sub/
// mul with limited broadcasting, scalar affine, concat/slice/transpose/
// reshape, stabilized softmax, relu/gelu/sigmoid/tanh, layer norm and sum
// reduction. Each op builds one graph node with a closed-form backward.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "csipred/kernels/kernels.hpp"
#include "csipred/nn/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace csipred::nn {

namespace detail {

// Supported broadcast patterns for binary elementwise ops.
//   same:   identical shapes
//   suffix: b (leading 1s stripped) equals the trailing dims of a; b repeats
//           over the leading blocks (bias vectors, PE tables)
//   block:  b matches the leading dims of a with trailing 1s; each b element
//           applies to one contiguous block (per-sample weights)
enum class Bcast { same, suffix, block };

inline Bcast classify_broadcast(const Shape& a, const Shape& b) {
  if (a == b) return Bcast::same;
  size_t bi = 0;
  while (bi < b.size() && b[bi] == 1) ++bi;
  const size_t bs = b.size() - bi;
  if (bs <= a.size()) {
    bool suffix = true;
    for (size_t i = 0; i < bs; ++i)
      if (b[bi + i] != a[a.size() - bs + i]) suffix = false;
    if (suffix) return Bcast::suffix;
  }
  if (a.size() == b.size()) {
    size_t split = 0;
    while (split < a.size() && a[split] == b[split]) ++split;
    bool block = split < a.size();
    for (size_t i = split; i < b.size(); ++i)
      if (b[i] != 1) block = false;
    if (block) return Bcast::block;
  }
  throw ShapeError("broadcast: incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
}

template <typename Real>
inline void fmadd_loop(int64_t n, const Real* x, const Real* y, Real* out) {
  for (int64_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

template <typename Real>
inline Real dot_loop(int64_t n, const Real* x, const Real* y) {
  Real s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  using detail::Bcast;
  const Bcast kind = detail::classify_broadcast(a.shape(), b.shape());
  const int64_t n = a.numel(), bn = b.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  const Real* pa = a.values().data();
  const Real* pb = b.values().data();
  if (kind == Bcast::same) {
    kernels::add<Real>(n, pa, pb, out.data());
  } else if (kind == Bcast::suffix) {
    for (int64_t off = 0; off < n; off += bn) kernels::add<Real>(bn, pa + off, pb, out.data() + off);
  } else {
    const int64_t block = n / bn;
    for (int64_t i = 0; i < bn; ++i)
      kernels::affine<Real>(block, Real(1), pb[i], pa + i * block, out.data() + i * block);
  }
  return Tensor<Real>::make_op(a.shape(), std::move(out), {a, b}, [kind, n, bn](Node<Real>& self) {
    const Real* g = self.grad.data();
    auto& pa_ = *self.parents[0];
    auto& pb_ = *self.parents[1];
    if (pa_.needs_grad) kernels::axpy<Real>(n, Real(1), g, pa_.grad.data());
    if (pb_.needs_grad) {
      Real* db = pb_.grad.data();
      if (kind == Bcast::same) {
        kernels::axpy<Real>(n, Real(1), g, db);
      } else if (kind == Bcast::suffix) {
        for (int64_t off = 0; off < n; off += bn) kernels::axpy<Real>(bn, Real(1), g + off, db);
      } else {
        const int64_t block = n / bn;
        for (int64_t i = 0; i < bn; ++i) db[i] += kernels::reduce_sum<Real>(block, g + i * block);
      }
    }
  });
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  using detail::Bcast;
  const Bcast kind = detail::classify_broadcast(a.shape(), b.shape());
  const int64_t n = a.numel(), bn = b.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  const Real* pa = a.values().data();
  const Real* pb = b.values().data();
  if (kind == Bcast::same) {
    kernels::sub<Real>(n, pa, pb, out.data());
  } else if (kind == Bcast::suffix) {
    for (int64_t off = 0; off < n; off += bn) kernels::sub<Real>(bn, pa + off, pb, out.data() + off);
  } else {
    const int64_t block = n / bn;
    for (int64_t i = 0; i < bn; ++i)
      kernels::affine<Real>(block, Real(1), -pb[i], pa + i * block, out.data() + i * block);
  }
  return Tensor<Real>::make_op(a.shape(), std::move(out), {a, b}, [kind, n, bn](Node<Real>& self) {
    const Real* g = self.grad.data();
    auto& pa_ = *self.parents[0];
    auto& pb_ = *self.parents[1];
    if (pa_.needs_grad) kernels::axpy<Real>(n, Real(1), g, pa_.grad.data());
    if (pb_.needs_grad) {
      Real* db = pb_.grad.data();
      if (kind == Bcast::same) {
        kernels::axpy<Real>(n, Real(-1), g, db);
      } else if (kind == Bcast::suffix) {
        for (int64_t off = 0; off < n; off += bn) kernels::axpy<Real>(bn, Real(-1), g + off, db);
      } else {
        const int64_t block = n / bn;
        for (int64_t i = 0; i < bn; ++i) db[i] -= kernels::reduce_sum<Real>(block, g + i * block);
      }
    }
  });
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  using detail::Bcast;
  const Bcast kind = detail::classify_broadcast(a.shape(), b.shape());
  const int64_t n = a.numel(), bn = b.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  const Real* pa = a.values().data();
  const Real* pb = b.values().data();
  if (kind == Bcast::same) {
    kernels::mul<Real>(n, pa, pb, out.data());
  } else if (kind == Bcast::suffix) {
    for (int64_t off = 0; off < n; off += bn) kernels::mul<Real>(bn, pa + off, pb, out.data() + off);
  } else {
    const int64_t block = n / bn;
    for (int64_t i = 0; i < bn; ++i)
      kernels::affine<Real>(block, pb[i], Real(0), pa + i * block, out.data() + i * block);
  }
  return Tensor<Real>::make_op(a.shape(), std::move(out), {a, b}, [kind, n, bn](Node<Real>& self) {
    const Real* g = self.grad.data();
    auto& pa_ = *self.parents[0];
    auto& pb_ = *self.parents[1];
    const Real* av = pa_.value.data();
    const Real* bv = pb_.value.data();
    if (pa_.needs_grad) {
      Real* da = pa_.grad.data();
      if (kind == Bcast::same) {
        detail::fmadd_loop<Real>(n, g, bv, da);
      } else if (kind == Bcast::suffix) {
        for (int64_t off = 0; off < n; off += bn) detail::fmadd_loop<Real>(bn, g + off, bv, da + off);
      } else {
        const int64_t block = n / bn;
        for (int64_t i = 0; i < bn; ++i) kernels::axpy<Real>(block, bv[i], g + i * block, da + i * block);
      }
    }
    if (pb_.needs_grad) {
      Real* db = pb_.grad.data();
      if (kind == Bcast::same) {
        detail::fmadd_loop<Real>(n, g, av, db);
      } else if (kind == Bcast::suffix) {
        for (int64_t off = 0; off < n; off += bn) detail::fmadd_loop<Real>(bn, g + off, av + off, db);
      } else {
        const int64_t block = n / bn;
        for (int64_t i = 0; i < bn; ++i)
          db[i] += detail::dot_loop<Real>(block, g + i * block, av + i * block);
      }
    }
  });
}

// out = alpha * x + beta, elementwise with scalar coefficients.
template <typename Real>
Tensor<Real> affine(const Tensor<Real>& x, Real alpha, Real beta) {
  const int64_t n = x.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  kernels::affine<Real>(n, alpha, beta, x.values().data(), out.data());
  return Tensor<Real>::make_op(x.shape(), std::move(out), {x}, [n, alpha](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (p.needs_grad) kernels::axpy<Real>(n, alpha, self.grad.data(), p.grad.data());
  });
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, Real alpha) {
  return affine(x, alpha, Real(0));
}

// ---------------------------------------------------------------------------
// Matmul

namespace detail {

template <typename Real>
void batched_gemm(bool trans_b, int64_t batch, int64_t m, int64_t n, int64_t k,
                  const Real* a, const Real* b, Real* c) {
  const int64_t as = m * k, bs = trans_b ? n * k : k * n, cs = m * n;
  const int64_t ldb = trans_b ? k : n;
  const bool parallel = batch >= 2 && batch * m * n * k >= (int64_t(1) << 17) &&
                        kernels::thread_count() > 1;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(kernels::thread_count()) if (parallel)
#endif
  for (int64_t i = 0; i < batch; ++i) {
    if (trans_b)
      kernels::gemm_nt<Real>(false, m, n, k, a + i * as, k, b + i * bs, ldb, c + i * cs, n);
    else
      kernels::gemm_nn<Real>(false, m, n, k, a + i * as, k, b + i * bs, ldb, c + i * cs, n);
  }
  (void)parallel;
}

}  // namespace detail

// matmul(a, b): contracts the last dim of `a` with `b`.
//   b rank 2:        y[..., i, j] = sum_k a[..., i, k] * b(k, j)   (or b(j, k) if trans_b)
//   equal-rank >= 3: batched over identical leading dims.
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b, bool trans_b = false) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2) throw ShapeError("matmul: lhs rank must be >= 2, got " + shape_str(sa));

  if (sb.size() == 2) {
    const int64_t k = sa.back();
    const int64_t kb = trans_b ? sb[1] : sb[0];
    const int64_t n = trans_b ? sb[0] : sb[1];
    if (k != kb)
      throw ShapeError("matmul: inner dims differ, " + shape_str(sa) + " x " + shape_str(sb) +
                       (trans_b ? " (rhs transposed)" : ""));
    const int64_t m = a.numel() / k;
    Shape out_shape(sa.begin(), sa.end() - 1);
    out_shape.push_back(n);
    std::vector<Real> out(static_cast<size_t>(m * n));
    if (trans_b)
      kernels::gemm_nt<Real>(false, m, n, k, a.values().data(), k, b.values().data(), k, out.data(), n);
    else
      kernels::gemm_nn<Real>(false, m, n, k, a.values().data(), k, b.values().data(), n, out.data(), n);
    return Tensor<Real>::make_op(
        std::move(out_shape), std::move(out), {a, b}, [m, n, k, trans_b](Node<Real>& self) {
          const Real* g = self.grad.data();
          auto& pa = *self.parents[0];
          auto& pb = *self.parents[1];
          if (pa.needs_grad) {
            if (trans_b)
              kernels::gemm_nn<Real>(true, m, k, n, g, n, pb.value.data(), k, pa.grad.data(), k);
            else
              kernels::gemm_nt<Real>(true, m, k, n, g, n, pb.value.data(), n, pa.grad.data(), k);
          }
          if (pb.needs_grad) {
            if (trans_b)
              kernels::gemm_tn<Real>(true, n, k, m, g, n, pa.value.data(), k, pb.grad.data(), k);
            else
              kernels::gemm_tn<Real>(true, k, n, m, pa.value.data(), k, g, n, pb.grad.data(), n);
          }
        });
  }

  if (sa.size() != sb.size() || sa.size() < 3)
    throw ShapeError("matmul: rank mismatch " + shape_str(sa) + " x " + shape_str(sb));
  for (size_t i = 0; i + 2 < sa.size(); ++i)
    if (sa[i] != sb[i]) throw ShapeError("matmul: batch dims differ " + shape_str(sa) + " x " + shape_str(sb));
  const int64_t m = sa[sa.size() - 2];
  const int64_t k = sa.back();
  const int64_t kb = trans_b ? sb.back() : sb[sb.size() - 2];
  const int64_t n = trans_b ? sb[sb.size() - 2] : sb.back();
  if (k != kb)
    throw ShapeError("matmul: inner dims differ, " + shape_str(sa) + " x " + shape_str(sb));
  int64_t batch = 1;
  for (size_t i = 0; i + 2 < sa.size(); ++i) batch *= sa[i];
  Shape out_shape(sa.begin(), sa.end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<Real> out(static_cast<size_t>(batch * m * n));
  detail::batched_gemm<Real>(trans_b, batch, m, n, k, a.values().data(), b.values().data(), out.data());
  return Tensor<Real>::make_op(
      std::move(out_shape), std::move(out), {a, b},
      [batch, m, n, k, trans_b](Node<Real>& self) {
        const Real* g = self.grad.data();
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const int64_t as = m * k, bs = trans_b ? n * k : k * n, cs = m * n;
        const int64_t ldb = trans_b ? k : n;
        for (int64_t i = 0; i < batch; ++i) {
          const Real* gi = g + i * cs;
          if (pa.needs_grad) {
            Real* da = pa.grad.data() + i * as;
            if (trans_b)
              kernels::gemm_nn<Real>(true, m, k, n, gi, n, pb.value.data() + i * bs, k, da, k);
            else
              kernels::gemm_nt<Real>(true, m, k, n, gi, n, pb.value.data() + i * bs, n, da, k);
          }
          if (pb.needs_grad) {
            Real* db = pb.grad.data() + i * bs;
            if (trans_b)
              kernels::gemm_tn<Real>(true, n, k, m, gi, n, pa.value.data() + i * as, k, db, k);
            else
              kernels::gemm_tn<Real>(true, k, n, m, pa.value.data() + i * as, k, gi, n, db, n);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Shape ops

// Swaps the last two dims.
template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& a) {
  const Shape& s = a.shape();
  if (s.size() < 2) throw ShapeError("transpose: rank must be >= 2, got " + shape_str(s));
  const int64_t m = s[s.size() - 2], n = s.back();
  const int64_t batch = a.numel() / (m * n);
  Shape out_shape = s;
  std::swap(out_shape[out_shape.size() - 2], out_shape.back());
  std::vector<Real> out(static_cast<size_t>(a.numel()));
  const Real* pa = a.values().data();
  for (int64_t bt = 0; bt < batch; ++bt) {
    const Real* src = pa + bt * m * n;
    Real* dst = out.data() + bt * m * n;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  return Tensor<Real>::make_op(std::move(out_shape), std::move(out), {a},
                               [batch, m, n](Node<Real>& self) {
                                 auto& p = *self.parents[0];
                                 if (!p.needs_grad) return;
                                 const Real* g = self.grad.data();
                                 Real* da = p.grad.data();
                                 for (int64_t bt = 0; bt < batch; ++bt) {
                                   const Real* gsrc = g + bt * m * n;
                                   Real* dst = da + bt * m * n;
                                   for (int64_t j = 0; j < n; ++j)
                                     for (int64_t i = 0; i < m; ++i) dst[i * n + j] += gsrc[j * m + i];
                                 }
                               });
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel())
    throw ShapeError("reshape: numel mismatch " + shape_str(a.shape()) + " -> " + shape_str(new_shape));
  std::vector<Real> out = a.values();
  const int64_t n = a.numel();
  return Tensor<Real>::make_op(std::move(new_shape), std::move(out), {a}, [n](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (p.needs_grad) kernels::axpy<Real>(n, Real(1), self.grad.data(), p.grad.data());
  });
}

template <typename Real>
Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, int axis_in) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  const int rank = static_cast<int>(s0.size());
  const int axis = axis_in < 0 ? rank + axis_in : axis_in;
  if (axis < 0 || axis >= rank) throw ShapeError("concat: bad axis");
  int64_t axis_total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int>(s.size()) != rank) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < rank; ++i)
      if (i != axis && s[i] != s0[i]) throw ShapeError("concat: dim mismatch at axis " + std::to_string(i));
    axis_total += s[axis];
  }
  Shape out_shape = s0;
  out_shape[axis] = axis_total;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s0[i];

  std::vector<Real> out(static_cast<size_t>(outer * axis_total * inner));
  std::vector<int64_t> offsets(parts.size());
  int64_t off = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    offsets[pi] = off;
    const int64_t d = parts[pi].shape()[axis];
    const Real* src = parts[pi].values().data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(src + o * d * inner, src + (o + 1) * d * inner,
                out.data() + (o * axis_total + off) * inner);
    off += d;
  }
  return Tensor<Real>::make_op(
      std::move(out_shape), std::move(out), parts,
      [outer, inner, axis_total, offsets](Node<Real>& self) {
        const Real* g = self.grad.data();
        for (size_t pi = 0; pi < self.parents.size(); ++pi) {
          auto& p = *self.parents[pi];
          if (!p.needs_grad) continue;
          const int64_t d = p.numel() / (outer * inner);
          Real* dst = p.grad.data();
          for (int64_t o = 0; o < outer; ++o)
            kernels::axpy<Real>(d * inner, Real(1), g + (o * axis_total + offsets[pi]) * inner,
                                dst + o * d * inner);
        }
      });
}

template <typename Real>
Tensor<Real> slice(const Tensor<Real>& a, int axis_in, int64_t start, int64_t len) {
  const Shape& s = a.shape();
  const int rank = static_cast<int>(s.size());
  const int axis = axis_in < 0 ? rank + axis_in : axis_in;
  if (axis < 0 || axis >= rank) throw ShapeError("slice: bad axis");
  if (start < 0 || len < 0 || start + len > s[axis])
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of bounds for dim " + std::to_string(s[axis]));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s[i];
  const int64_t d = s[axis];
  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<Real> out(static_cast<size_t>(outer * len * inner));
  const Real* src = a.values().data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(src + (o * d + start) * inner, src + (o * d + start + len) * inner,
              out.data() + o * len * inner);
  return Tensor<Real>::make_op(std::move(out_shape), std::move(out), {a},
                               [outer, inner, d, start, len](Node<Real>& self) {
                                 auto& p = *self.parents[0];
                                 if (!p.needs_grad) return;
                                 const Real* g = self.grad.data();
                                 Real* dst = p.grad.data();
                                 for (int64_t o = 0; o < outer; ++o)
                                   kernels::axpy<Real>(len * inner, Real(1), g + o * len * inner,
                                                       dst + (o * d + start) * inner);
                               });
}

// ---------------------------------------------------------------------------
// Softmax

namespace detail {

// Moves `axis` to the last position (copy). perm=false restores.
template <typename Real>
std::vector<Real> move_axis_last(const std::vector<Real>& data, const Shape& s, int axis, bool inverse) {
  const int rank = static_cast<int>(s.size());
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s[i];
  const int64_t d = s[axis];
  std::vector<Real> out(data.size());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t j = 0; j < d; ++j)
      for (int64_t i = 0; i < inner; ++i) {
        const int64_t orig = (o * d + j) * inner + i;
        const int64_t perm = (o * inner + i) * d + j;
        if (inverse)
          out[orig] = data[perm];
        else
          out[perm] = data[orig];
      }
  return out;
}

}  // namespace detail

// Stabilized softmax along `axis` (max subtraction, exact normalization).
template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x, int axis_in = -1) {
  const Shape& s = x.shape();
  const int rank = static_cast<int>(s.size());
  const int axis = axis_in < 0 ? rank + axis_in : axis_in;
  if (axis < 0 || axis >= rank) throw ContractError("softmax: bad axis " + std::to_string(axis_in));
  const int64_t d = s[axis];
  const int64_t rows = x.numel() / d;

  std::vector<Real> out(static_cast<size_t>(x.numel()));
  const bool last = axis == rank - 1;
  if (last) {
    kernels::softmax_rows<Real>(rows, d, x.values().data(), out.data());
  } else {
    auto perm = detail::move_axis_last<Real>(x.values(), s, axis, false);
    std::vector<Real> soft(perm.size());
    kernels::softmax_rows<Real>(rows, d, perm.data(), soft.data());
    out = detail::move_axis_last<Real>(soft, s, axis, true);
  }
  Shape shape = s;
  return Tensor<Real>::make_op(std::move(shape), std::move(out), {x}, [axis, d, rows, last](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (!p.needs_grad) return;
    // dx = y * (dy - sum(dy * y, axis))
    auto backward_rows = [&](const Real* y, const Real* dy, Real* dx, auto assign) {
      for (int64_t r = 0; r < rows; ++r) {
        const Real* yr = y + r * d;
        const Real* gr = dy + r * d;
        Real dot = 0;
        for (int64_t j = 0; j < d; ++j) dot += yr[j] * gr[j];
        for (int64_t j = 0; j < d; ++j) assign(dx + r * d + j, yr[j] * (gr[j] - dot));
      }
    };
    if (last) {
      backward_rows(self.value.data(), self.grad.data(), p.grad.data(),
                    [](Real* dst, Real v) { *dst += v; });
    } else {
      auto yp = detail::move_axis_last<Real>(self.value, self.shape, axis, false);
      auto gp = detail::move_axis_last<Real>(self.grad, self.shape, axis, false);
      std::vector<Real> dxp(yp.size());
      backward_rows(yp.data(), gp.data(), dxp.data(), [](Real* dst, Real v) { *dst = v; });
      auto dx = detail::move_axis_last<Real>(dxp, self.shape, axis, true);
      kernels::axpy<Real>(p.numel(), Real(1), dx.data(), p.grad.data());
    }
  });
}

// ---------------------------------------------------------------------------
// Activations

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  const int64_t n = x.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  const Real* px = x.values().data();
  for (int64_t i = 0; i < n; ++i) out[i] = px[i] > Real(0) ? px[i] : Real(0);
  return Tensor<Real>::make_op(x.shape(), std::move(out), {x}, [n](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (!p.needs_grad) return;
    const Real* g = self.grad.data();
    const Real* xv = p.value.data();
    Real* dx = p.grad.data();
    for (int64_t i = 0; i < n; ++i)
      if (xv[i] > Real(0)) dx[i] += g[i];
  });
}

namespace detail {

// float paths use float-precision erf/exp, the gradient-check (double) path
// keeps full precision
template <typename Real>
inline Real gauss_cdf(Real v) {
  if constexpr (std::is_same_v<Real, float>)
    return 0.5f * (1.0f + ::erff(v * 0.70710678118654752f));
  else
    return Real(0.5) * (Real(1) + std::erf(v / std::numbers::sqrt2_v<double>));
}

template <typename Real>
inline Real gauss_pdf(Real v) {
  constexpr Real inv_sqrt2pi = Real(0.3989422804014326779);
  if constexpr (std::is_same_v<Real, float>)
    return inv_sqrt2pi * ::expf(-0.5f * v * v);
  else
    return inv_sqrt2pi * std::exp(Real(-0.5) * v * v);
}

}  // namespace detail

// Exact Gaussian-CDF GeLU: x * Phi(x).
template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& x) {
  const int64_t n = x.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  const Real* px = x.values().data();
  for (int64_t i = 0; i < n; ++i) out[i] = px[i] * detail::gauss_cdf(px[i]);
  return Tensor<Real>::make_op(x.shape(), std::move(out), {x}, [n](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (!p.needs_grad) return;
    const Real* g = self.grad.data();
    const Real* xv = p.value.data();
    Real* dx = p.grad.data();
    for (int64_t i = 0; i < n; ++i) {
      const Real v = xv[i];
      dx[i] += g[i] * (detail::gauss_cdf(v) + v * detail::gauss_pdf(v));
    }
  });
}

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) {
  const int64_t n = x.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  kernels::sigmoid<Real>(n, x.values().data(), out.data());
  return Tensor<Real>::make_op(x.shape(), std::move(out), {x}, [n](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (!p.needs_grad) return;
    const Real* g = self.grad.data();
    const Real* y = self.value.data();
    Real* dx = p.grad.data();
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (Real(1) - y[i]);
  });
}

template <typename Real>
Tensor<Real> tanh_op(const Tensor<Real>& x) {
  const int64_t n = x.numel();
  std::vector<Real> out(static_cast<size_t>(n));
  kernels::tanh_map<Real>(n, x.values().data(), out.data());
  return Tensor<Real>::make_op(x.shape(), std::move(out), {x}, [n](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (!p.needs_grad) return;
    const Real* g = self.grad.data();
    const Real* y = self.value.data();
    Real* dx = p.grad.data();
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * (Real(1) - y[i] * y[i]);
  });
}

// ---------------------------------------------------------------------------
// Layer norm (population variance over the trailing dim)

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain,
                        const Tensor<Real>& bias, Real eps) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("layer_norm: rank must be >= 1");
  const int64_t d = s.back();
  if (gain.numel() != d || bias.numel() != d)
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  if (eps <= Real(0)) throw ContractError("layer_norm: epsilon must be positive");
  const int64_t rows = x.numel() / d;

  std::vector<Real> out(static_cast<size_t>(x.numel()));
  std::vector<Real> xhat(static_cast<size_t>(x.numel()));
  std::vector<Real> inv_std(static_cast<size_t>(rows));
  const Real* px = x.values().data();
  const Real* pg = gain.values().data();
  const Real* pb = bias.values().data();
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = px + r * d;
    Real mean = kernels::reduce_sum<Real>(d, xr) / static_cast<Real>(d);
    Real var = 0;
    for (int64_t j = 0; j < d; ++j) {
      const Real c = xr[j] - mean;
      var += c * c;
    }
    var /= static_cast<Real>(d);
    const Real istd = Real(1) / std::sqrt(var + eps);
    inv_std[r] = istd;
    Real* hr = xhat.data() + r * d;
    Real* yr = out.data() + r * d;
    for (int64_t j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * istd;
      yr[j] = hr[j] * pg[j] + pb[j];
    }
  }
  Shape shape = s;
  return Tensor<Real>::make_op(
      std::move(shape), std::move(out), {x, gain, bias},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<Real>& self) {
        auto& px_ = *self.parents[0];
        auto& pg_ = *self.parents[1];
        auto& pb_ = *self.parents[2];
        const Real* g = self.grad.data();
        const Real* gainv = pg_.value.data();
        for (int64_t r = 0; r < rows; ++r) {
          const Real* gr = g + r * d;
          const Real* hr = xhat.data() + r * d;
          if (pg_.needs_grad) {
            Real* dg = pg_.grad.data();
            for (int64_t j = 0; j < d; ++j) dg[j] += gr[j] * hr[j];
          }
          if (pb_.needs_grad) {
            Real* db = pb_.grad.data();
            for (int64_t j = 0; j < d; ++j) db[j] += gr[j];
          }
          if (px_.needs_grad) {
            Real sum_dh = 0, sum_dh_h = 0;
            for (int64_t j = 0; j < d; ++j) {
              const Real dh = gr[j] * gainv[j];
              sum_dh += dh;
              sum_dh_h += dh * hr[j];
            }
            const Real inv_d = Real(1) / static_cast<Real>(d);
            Real* dx = px_.grad.data() + r * d;
            for (int64_t j = 0; j < d; ++j) {
              const Real dh = gr[j] * gainv[j];
              dx[j] += inv_std[r] * (dh - sum_dh * inv_d - hr[j] * sum_dh_h * inv_d);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Real>
Tensor<Real> sum_all(const Tensor<Real>& x) {
  const int64_t n = x.numel();
  std::vector<Real> out{kernels::reduce_sum<Real>(n, x.values().data())};
  return Tensor<Real>::make_op(Shape{1}, std::move(out), {x}, [n](Node<Real>& self) {
    auto& p = *self.parents[0];
    if (!p.needs_grad) return;
    const Real g = self.grad[0];
    Real* dx = p.grad.data();
    for (int64_t i = 0; i < n; ++i) dx[i] += g;
  });
}

template <typename Real>
Tensor<Real> mean_all(const Tensor<Real>& x) {
  return scale(sum_all(x), Real(1) / static_cast<Real>(x.numel()));
}

// Stacks equal-shape tensors along a new leading-of-axis dim by reshaping
// each part to insert a unit axis, then concatenating.
template <typename Real>
Tensor<Real> stack(const std::vector<Tensor<Real>>& parts, int axis) {
  std::vector<Tensor<Real>> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    Shape s = p.shape();
    s.insert(s.begin() + axis, 1);
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, axis);
}

}  // namespace csipred::nn
