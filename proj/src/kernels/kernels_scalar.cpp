// Scalar reference kernels. These define the semantics the SIMD variants are
// equivalence-tested against. Plain loops, fixed accumulation order.

#include <cmath>
#include <cstdint>

#include "csipred/kernels/kernels.hpp"

namespace csipred::kernels::detail {

template <typename Real>
void gemm_nn_scalar(bool acc, int64_t m, int64_t n, int64_t k, const Real* a,
                    int64_t lda, const Real* b, int64_t ldb, Real* c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i) {
    Real* crow = c + i * ldc;
    if (!acc) {
      for (int64_t j = 0; j < n; ++j) crow[j] = Real(0);
    }
    for (int64_t p = 0; p < k; ++p) {
      const Real aip = a[i * lda + p];
      const Real* brow = b + p * ldb;
      for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <typename Real>
void gemm_nt_scalar(bool acc, int64_t m, int64_t n, int64_t k, const Real* a,
                    int64_t lda, const Real* b, int64_t ldb, Real* c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i) {
    const Real* arow = a + i * lda;
    Real* crow = c + i * ldc;
    for (int64_t j = 0; j < n; ++j) {
      const Real* brow = b + j * ldb;
      Real s = 0;
      for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

template <typename Real>
void gemm_tn_scalar(bool acc, int64_t m, int64_t n, int64_t r, const Real* a,
                    int64_t lda, const Real* b, int64_t ldb, Real* c, int64_t ldc) {
  if (!acc) {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) c[i * ldc + j] = Real(0);
  }
  for (int64_t p = 0; p < r; ++p) {
    const Real* arow = a + p * lda;
    const Real* brow = b + p * ldb;
    for (int64_t i = 0; i < m; ++i) {
      const Real api = arow[i];
      Real* crow = c + i * ldc;
      for (int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

template <typename Real>
void adam_update_scalar(int64_t n, Real* p, const Real* g, Real* m, Real* v,
                        Real lr, Real beta1, Real beta2, Real eps, Real c1, Real c2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (Real(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (Real(1) - beta2) * g[i] * g[i];
    const Real mhat = m[i] * c1;
    const Real vhat = v[i] * c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename Real>
void softmax_rows_scalar(int64_t rows, int64_t n, const Real* x, Real* out) {
  for (int64_t r = 0; r < rows; ++r) {
    const Real* xr = x + r * n;
    Real* yr = out + r * n;
    Real mx = xr[0];
    for (int64_t i = 1; i < n; ++i) mx = xr[i] > mx ? xr[i] : mx;
    Real sum = 0;
    for (int64_t i = 0; i < n; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      sum += yr[i];
    }
    const Real inv = Real(1) / sum;
    for (int64_t i = 0; i < n; ++i) yr[i] *= inv;
  }
}

// Explicit wrappers the dispatcher points at.
void gemm_nn_f32_scalar(bool acc, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) { gemm_nn_scalar(acc, m, n, k, a, lda, b, ldb, c, ldc); }
void gemm_nt_f32_scalar(bool acc, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) { gemm_nt_scalar(acc, m, n, k, a, lda, b, ldb, c, ldc); }
void gemm_tn_f32_scalar(bool acc, int64_t m, int64_t n, int64_t r, const float* a, int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) { gemm_tn_scalar(acc, m, n, r, a, lda, b, ldb, c, ldc); }

void add_f32_scalar(int64_t n, const float* a, const float* b, float* out) { for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i]; }
void sub_f32_scalar(int64_t n, const float* a, const float* b, float* out) { for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i]; }
void mul_f32_scalar(int64_t n, const float* a, const float* b, float* out) { for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i]; }
void axpy_f32_scalar(int64_t n, float alpha, const float* x, float* y) { for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i]; }
void affine_f32_scalar(int64_t n, float alpha, float beta, const float* x, float* out) { for (int64_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta; }
float reduce_sum_f32_scalar(int64_t n, const float* x) { float s = 0; for (int64_t i = 0; i < n; ++i) s += x[i]; return s; }
void adam_update_f32_scalar(int64_t n, float* p, const float* g, float* m, float* v, float lr, float beta1, float beta2, float eps, float c1, float c2) { adam_update_scalar(n, p, g, m, v, lr, beta1, beta2, eps, c1, c2); }
void softmax_rows_f32_scalar(int64_t rows, int64_t n, const float* x, float* out) { softmax_rows_scalar(rows, n, x, out); }

void sigmoid_f32_scalar(int64_t n, const float* x, float* out) {
  for (int64_t i = 0; i < n; ++i) {
    const float v = x[i];
    if (v >= 0.0f) {
      out[i] = 1.0f / (1.0f + std::exp(-v));
    } else {
      const float e = std::exp(v);
      out[i] = e / (1.0f + e);
    }
  }
}

void tanh_f32_scalar(int64_t n, const float* x, float* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

}  // namespace csipred::kernels::detail

namespace csipred::kernels {

// float64 has no SIMD variant; the gradient-check path is cold.
void gemm_nn_f64(bool acc, int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc) { detail::gemm_nn_scalar(acc, m, n, k, a, lda, b, ldb, c, ldc); }
void gemm_nt_f64(bool acc, int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc) { detail::gemm_nt_scalar(acc, m, n, k, a, lda, b, ldb, c, ldc); }
void gemm_tn_f64(bool acc, int64_t m, int64_t n, int64_t r, const double* a, int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc) { detail::gemm_tn_scalar(acc, m, n, r, a, lda, b, ldb, c, ldc); }

void add_f64(int64_t n, const double* a, const double* b, double* out) { for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i]; }
void sub_f64(int64_t n, const double* a, const double* b, double* out) { for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i]; }
void mul_f64(int64_t n, const double* a, const double* b, double* out) { for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i]; }
void axpy_f64(int64_t n, double alpha, const double* x, double* y) { for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i]; }
void affine_f64(int64_t n, double alpha, double beta, const double* x, double* out) { for (int64_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta; }
double reduce_sum_f64(int64_t n, const double* x) { double s = 0; for (int64_t i = 0; i < n; ++i) s += x[i]; return s; }
void adam_update_f64(int64_t n, double* p, const double* g, double* m, double* v, double lr, double beta1, double beta2, double eps, double c1, double c2) { detail::adam_update_scalar(n, p, g, m, v, lr, beta1, beta2, eps, c1, c2); }
void softmax_rows_f64(int64_t rows, int64_t n, const double* x, double* out) { detail::softmax_rows_scalar(rows, n, x, out); }

void sigmoid_f64(int64_t n, const double* x, double* out) {
  for (int64_t i = 0; i < n; ++i) {
    const double v = x[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
}

void tanh_f64(int64_t n, const double* x, double* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
}

}  // namespace csipred::kernels
