// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma in its own TU; only
// reachable through the dispatch table when the CPU reports AVX2 support.
//
// Determinism note: every output element is produced by exactly one thread
// with a fixed reduction order, so results do not depend on thread count.

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "csipred/kernels/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace csipred::kernels::detail {

namespace {

// Sums each of four 8-lane accumulators into one lane of a __m128.
inline __m128 hsum4x8(__m256 v0, __m256 v1, __m256 v2, __m256 v3) {
  const __m256 s01 = _mm256_hadd_ps(v0, v1);
  const __m256 s23 = _mm256_hadd_ps(v2, v3);
  const __m256 s = _mm256_hadd_ps(s01, s23);
  return _mm_add_ps(_mm256_castps256_ps128(s), _mm256_extractf128_ps(s, 1));
}

// Adjacent-pairs reduction, the same tree hsum4x8 applies per accumulator.
// Keeping one tree everywhere makes a row's dot product bitwise independent
// of how its neighbours were blocked.
inline float hsum8(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_hadd_ps(lo, hi);  // [v0+v1, v2+v3, v4+v5, v6+v7]
  s = _mm_hadd_ps(s, s);
  s = _mm_hadd_ps(s, s);
  return _mm_cvtss_f32(s);
}

inline float dot8(int64_t k, const float* a, const float* b) {
  __m256 acc = _mm256_setzero_ps();
  int64_t p = 0;
  for (; p + 8 <= k; p += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + p), _mm256_loadu_ps(b + p), acc);
  // tail accumulated separately and added once, matching the blocked path
  float tail = 0.0f;
  for (; p < k; ++p) tail += a[p] * b[p];
  return hsum8(acc) + tail;
}

// Polynomial exp with the usual 2^n * e^r split. Inputs at or below the
// underflow cutoff return exactly zero, so a score pinned to the most
// negative float turns into an exactly-zero softmax weight.
inline __m256 exp256(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647950f);
  const __m256 cutoff = _mm256_set1_ps(-87.3365478515625f);
  const __m256 zero_mask = _mm256_cmp_ps(x, cutoff, _CMP_GT_OQ);
  x = _mm256_min_ps(x, hi);
  x = _mm256_max_ps(x, cutoff);

  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 half = _mm256_set1_ps(0.5f);
  __m256 fx = _mm256_fmadd_ps(x, log2e, half);
  fx = _mm256_floor_ps(fx);

  const __m256 ln2_hi = _mm256_set1_ps(0.693359375f);
  const __m256 ln2_lo = _mm256_set1_ps(-2.12194440e-4f);
  __m256 r = _mm256_fnmadd_ps(fx, ln2_hi, x);
  r = _mm256_fnmadd_ps(fx, ln2_lo, r);

  const __m256 c1 = _mm256_set1_ps(1.9875691500e-4f);
  const __m256 c2 = _mm256_set1_ps(1.3981999507e-3f);
  const __m256 c3 = _mm256_set1_ps(8.3334519073e-3f);
  const __m256 c4 = _mm256_set1_ps(4.1665795894e-2f);
  const __m256 c5 = _mm256_set1_ps(1.6666665459e-1f);
  const __m256 c6 = _mm256_set1_ps(5.0000001201e-1f);
  __m256 p = c1;
  p = _mm256_fmadd_ps(p, r, c2);
  p = _mm256_fmadd_ps(p, r, c3);
  p = _mm256_fmadd_ps(p, r, c4);
  p = _mm256_fmadd_ps(p, r, c5);
  p = _mm256_fmadd_ps(p, r, c6);
  const __m256 r2 = _mm256_mul_ps(r, r);
  p = _mm256_fmadd_ps(p, r2, _mm256_add_ps(r, _mm256_set1_ps(1.0f)));

  const __m256i n = _mm256_cvtps_epi32(fx);
  const __m256i pow2n = _mm256_slli_epi32(_mm256_add_epi32(n, _mm256_set1_epi32(127)), 23);
  p = _mm256_mul_ps(p, _mm256_castsi256_ps(pow2n));
  return _mm256_and_ps(p, zero_mask);
}

inline int row_threads(int64_t rows, int64_t work_per_row) {
  int nt = thread_count();
  if (nt <= 1) return 1;
  if (rows * work_per_row < (int64_t(1) << 18)) return 1;
  return rows < nt ? static_cast<int>(rows) : nt;
}

void gemm_nt_rows(bool acc, int64_t i0, int64_t i1, int64_t n, int64_t k,
                  const float* a, int64_t lda, const float* b, int64_t ldb,
                  float* c, int64_t ldc) {
  int64_t i = i0;
  for (; i + 2 <= i1; i += 2) {
    const float* a0 = a + i * lda;
    const float* a1 = a0 + lda;
    float* c0 = c + i * ldc;
    float* c1 = c0 + ldc;
    int64_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* b0 = b + j * ldb;
      const float* b1 = b0 + ldb;
      const float* b2 = b1 + ldb;
      const float* b3 = b2 + ldb;
      __m256 r00 = _mm256_setzero_ps(), r01 = _mm256_setzero_ps();
      __m256 r02 = _mm256_setzero_ps(), r03 = _mm256_setzero_ps();
      __m256 r10 = _mm256_setzero_ps(), r11 = _mm256_setzero_ps();
      __m256 r12 = _mm256_setzero_ps(), r13 = _mm256_setzero_ps();
      int64_t p = 0;
      for (; p + 8 <= k; p += 8) {
        const __m256 va0 = _mm256_loadu_ps(a0 + p);
        const __m256 va1 = _mm256_loadu_ps(a1 + p);
        const __m256 vb0 = _mm256_loadu_ps(b0 + p);
        const __m256 vb1 = _mm256_loadu_ps(b1 + p);
        const __m256 vb2 = _mm256_loadu_ps(b2 + p);
        const __m256 vb3 = _mm256_loadu_ps(b3 + p);
        r00 = _mm256_fmadd_ps(va0, vb0, r00);
        r01 = _mm256_fmadd_ps(va0, vb1, r01);
        r02 = _mm256_fmadd_ps(va0, vb2, r02);
        r03 = _mm256_fmadd_ps(va0, vb3, r03);
        r10 = _mm256_fmadd_ps(va1, vb0, r10);
        r11 = _mm256_fmadd_ps(va1, vb1, r11);
        r12 = _mm256_fmadd_ps(va1, vb2, r12);
        r13 = _mm256_fmadd_ps(va1, vb3, r13);
      }
      __m128 s0 = hsum4x8(r00, r01, r02, r03);
      __m128 s1 = hsum4x8(r10, r11, r12, r13);
      if (p < k) {
        alignas(16) float t0[4] = {0, 0, 0, 0};
        alignas(16) float t1[4] = {0, 0, 0, 0};
        for (; p < k; ++p) {
          t0[0] += a0[p] * b0[p]; t0[1] += a0[p] * b1[p];
          t0[2] += a0[p] * b2[p]; t0[3] += a0[p] * b3[p];
          t1[0] += a1[p] * b0[p]; t1[1] += a1[p] * b1[p];
          t1[2] += a1[p] * b2[p]; t1[3] += a1[p] * b3[p];
        }
        s0 = _mm_add_ps(s0, _mm_load_ps(t0));
        s1 = _mm_add_ps(s1, _mm_load_ps(t1));
      }
      if (acc) {
        s0 = _mm_add_ps(s0, _mm_loadu_ps(c0 + j));
        s1 = _mm_add_ps(s1, _mm_loadu_ps(c1 + j));
      }
      _mm_storeu_ps(c0 + j, s0);
      _mm_storeu_ps(c1 + j, s1);
    }
    for (; j < n; ++j) {
      const float* bj = b + j * ldb;
      const float d0 = dot8(k, a0, bj);
      const float d1 = dot8(k, a1, bj);
      c0[j] = acc ? c0[j] + d0 : d0;
      c1[j] = acc ? c1[j] + d1 : d1;
    }
  }
  for (; i < i1; ++i) {
    const float* ai = a + i * lda;
    float* ci = c + i * ldc;
    for (int64_t j = 0; j < n; ++j) {
      const float d = dot8(k, ai, b + j * ldb);
      ci[j] = acc ? ci[j] + d : d;
    }
  }
}

void gemm_nn_row(bool acc, int64_t i, int64_t n, int64_t k, const float* a,
                 int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) {
  const float* arow = a + i * lda;
  float* crow = c + i * ldc;
  int64_t j = 0;
  for (; j + 32 <= n; j += 32) {
    __m256 q0, q1, q2, q3;
    if (acc) {
      q0 = _mm256_loadu_ps(crow + j);
      q1 = _mm256_loadu_ps(crow + j + 8);
      q2 = _mm256_loadu_ps(crow + j + 16);
      q3 = _mm256_loadu_ps(crow + j + 24);
    } else {
      q0 = q1 = q2 = q3 = _mm256_setzero_ps();
    }
    for (int64_t p = 0; p < k; ++p) {
      const __m256 av = _mm256_set1_ps(arow[p]);
      const float* brow = b + p * ldb + j;
      q0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow), q0);
      q1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 8), q1);
      q2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 16), q2);
      q3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 24), q3);
    }
    _mm256_storeu_ps(crow + j, q0);
    _mm256_storeu_ps(crow + j + 8, q1);
    _mm256_storeu_ps(crow + j + 16, q2);
    _mm256_storeu_ps(crow + j + 24, q3);
  }
  for (; j + 8 <= n; j += 8) {
    __m256 q = acc ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
    for (int64_t p = 0; p < k; ++p)
      q = _mm256_fmadd_ps(_mm256_set1_ps(arow[p]), _mm256_loadu_ps(b + p * ldb + j), q);
    _mm256_storeu_ps(crow + j, q);
  }
  for (; j < n; ++j) {
    float s = acc ? crow[j] : 0.0f;
    for (int64_t p = 0; p < k; ++p) s += arow[p] * b[p * ldb + j];
    crow[j] = s;
  }
}

void gemm_tn_rows(bool acc, int64_t i0, int64_t i1, int64_t n, int64_t r,
                  const float* a, int64_t lda, const float* b, int64_t ldb,
                  float* c, int64_t ldc) {
  for (int64_t i = i0; i < i1; ++i) {
    float* crow = c + i * ldc;
    int64_t j = 0;
    for (; j + 32 <= n; j += 32) {
      __m256 q0, q1, q2, q3;
      if (acc) {
        q0 = _mm256_loadu_ps(crow + j);
        q1 = _mm256_loadu_ps(crow + j + 8);
        q2 = _mm256_loadu_ps(crow + j + 16);
        q3 = _mm256_loadu_ps(crow + j + 24);
      } else {
        q0 = q1 = q2 = q3 = _mm256_setzero_ps();
      }
      for (int64_t p = 0; p < r; ++p) {
        const __m256 av = _mm256_set1_ps(a[p * lda + i]);
        const float* brow = b + p * ldb + j;
        q0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow), q0);
        q1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 8), q1);
        q2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 16), q2);
        q3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 24), q3);
      }
      _mm256_storeu_ps(crow + j, q0);
      _mm256_storeu_ps(crow + j + 8, q1);
      _mm256_storeu_ps(crow + j + 16, q2);
      _mm256_storeu_ps(crow + j + 24, q3);
    }
    for (; j + 8 <= n; j += 8) {
      __m256 q = acc ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
      for (int64_t p = 0; p < r; ++p)
        q = _mm256_fmadd_ps(_mm256_set1_ps(a[p * lda + i]), _mm256_loadu_ps(b + p * ldb + j), q);
      _mm256_storeu_ps(crow + j, q);
    }
    for (; j < n; ++j) {
      float s = acc ? crow[j] : 0.0f;
      for (int64_t p = 0; p < r; ++p) s += a[p * lda + i] * b[p * ldb + j];
      crow[j] = s;
    }
  }
}

}  // namespace

void gemm_nt_f32_avx2(bool acc, int64_t m, int64_t n, int64_t k, const float* a,
                      int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) {
  const int nt = row_threads(m, n * k);
  if (nt <= 1) {
    gemm_nt_rows(acc, 0, m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel num_threads(nt)
  {
    const int tid = omp_get_thread_num();
    const int64_t chunk = (m + nt - 1) / nt;
    const int64_t i0 = tid * chunk;
    const int64_t i1 = i0 + chunk < m ? i0 + chunk : m;
    if (i0 < i1) gemm_nt_rows(acc, i0, i1, n, k, a, lda, b, ldb, c, ldc);
  }
#else
  gemm_nt_rows(acc, 0, m, n, k, a, lda, b, ldb, c, ldc);
#endif
}

void gemm_nn_f32_avx2(bool acc, int64_t m, int64_t n, int64_t k, const float* a,
                      int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) {
  const int nt = row_threads(m, n * k);
#ifdef _OPENMP
  if (nt > 1) {
#pragma omp parallel for num_threads(nt) schedule(static)
    for (int64_t i = 0; i < m; ++i) gemm_nn_row(acc, i, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
#endif
  (void)nt;
  for (int64_t i = 0; i < m; ++i) gemm_nn_row(acc, i, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn_f32_avx2(bool acc, int64_t m, int64_t n, int64_t r, const float* a,
                      int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) {
  const int nt = row_threads(m, n * r);
  if (nt <= 1) {
    gemm_tn_rows(acc, 0, m, n, r, a, lda, b, ldb, c, ldc);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel num_threads(nt)
  {
    const int tid = omp_get_thread_num();
    const int64_t chunk = (m + nt - 1) / nt;
    const int64_t i0 = tid * chunk;
    const int64_t i1 = i0 + chunk < m ? i0 + chunk : m;
    if (i0 < i1) gemm_tn_rows(acc, i0, i1, n, r, a, lda, b, ldb, c, ldc);
  }
#else
  gemm_tn_rows(acc, 0, m, n, r, a, lda, b, ldb, c, ldc);
#endif
}

void add_f32_avx2(int64_t n, const float* a, const float* b, float* out) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_f32_avx2(int64_t n, const float* a, const float* b, float* out) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_f32_avx2(int64_t n, const float* a, const float* b, float* out) {
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_f32_avx2(int64_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void affine_f32_avx2(int64_t n, float alpha, float beta, const float* x, float* out) {
  const __m256 av = _mm256_set1_ps(alpha);
  const __m256 bv = _mm256_set1_ps(beta);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), bv));
  for (; i < n; ++i) out[i] = alpha * x[i] + beta;
}

float reduce_sum_f32_avx2(int64_t n, const float* x) {
  __m256 acc = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum8(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void adam_update_f32_avx2(int64_t n, float* p, const float* g, float* m, float* v,
                          float lr, float beta1, float beta2, float eps,
                          float c1, float c2) {
  const __m256 b1 = _mm256_set1_ps(beta1);
  const __m256 b2 = _mm256_set1_ps(beta2);
  const __m256 ob1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 ob2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 c1v = _mm256_set1_ps(c1);
  const __m256 c2v = _mm256_set1_ps(c2);
  const __m256 lrv = _mm256_set1_ps(lr);
  const __m256 epsv = _mm256_set1_ps(eps);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    __m256 mv = _mm256_loadu_ps(m + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    mv = _mm256_add_ps(_mm256_mul_ps(b1, mv), _mm256_mul_ps(ob1, gv));
    vv = _mm256_add_ps(_mm256_mul_ps(b2, vv), _mm256_mul_ps(ob2, _mm256_mul_ps(gv, gv)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(mv, c1v);
    const __m256 vhat = _mm256_mul_ps(vv, c2v);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(lrv, mhat), denom);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

void softmax_rows_f32_avx2(int64_t rows, int64_t n, const float* x, float* out) {
  for (int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * n;
    float* yr = out + r * n;
    float mx;
    int64_t i;
    if (n >= 8) {
      __m256 mxv = _mm256_loadu_ps(xr);
      for (i = 8; i + 8 <= n; i += 8) mxv = _mm256_max_ps(mxv, _mm256_loadu_ps(xr + i));
      alignas(32) float lanes[8];
      _mm256_store_ps(lanes, mxv);
      mx = lanes[0];
      for (int l = 1; l < 8; ++l) mx = lanes[l] > mx ? lanes[l] : mx;
    } else {
      mx = xr[0];
      i = 1;
    }
    for (; i < n; ++i) mx = xr[i] > mx ? xr[i] : mx;

    const __m256 mxv8 = _mm256_set1_ps(mx);
    __m256 sumv = _mm256_setzero_ps();
    i = 0;
    for (; i + 8 <= n; i += 8) {
      const __m256 e = exp256(_mm256_sub_ps(_mm256_loadu_ps(xr + i), mxv8));
      _mm256_storeu_ps(yr + i, e);
      sumv = _mm256_add_ps(sumv, e);
    }
    float sum = hsum8(sumv);
    for (; i < n; ++i) {
      alignas(32) float lane[8] = {xr[i] - mx, -200.0f, -200.0f, -200.0f,
                                   -200.0f,    -200.0f, -200.0f, -200.0f};
      alignas(32) float out1[8];
      _mm256_store_ps(out1, exp256(_mm256_load_ps(lane)));
      yr[i] = out1[0];
      sum += out1[0];
    }
    const __m256 inv = _mm256_set1_ps(1.0f / sum);
    i = 0;
    for (; i + 8 <= n; i += 8)
      _mm256_storeu_ps(yr + i, _mm256_mul_ps(_mm256_loadu_ps(yr + i), inv));
    for (; i < n; ++i) yr[i] *= 1.0f / sum;
  }
}

void sigmoid_f32_avx2(int64_t n, const float* x, float* out) {
  const __m256 one = _mm256_set1_ps(1.0f);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 e = exp256(_mm256_sub_ps(_mm256_setzero_ps(), v));
    _mm256_storeu_ps(out + i, _mm256_div_ps(one, _mm256_add_ps(one, e)));
  }
  for (; i < n; ++i) {
    alignas(32) float lane[8] = {-x[i], 0, 0, 0, 0, 0, 0, 0};
    alignas(32) float e[8];
    _mm256_store_ps(e, exp256(_mm256_load_ps(lane)));
    out[i] = 1.0f / (1.0f + e[0]);
  }
}

void tanh_f32_avx2(int64_t n, const float* x, float* out) {
  // tanh(x) = (e^{2x} - 1) / (e^{2x} + 1); exp's clamp saturates the tails.
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 two = _mm256_set1_ps(2.0f);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 e = exp256(_mm256_mul_ps(two, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(out + i,
                     _mm256_div_ps(_mm256_sub_ps(e, one), _mm256_add_ps(e, one)));
  }
  for (; i < n; ++i) {
    alignas(32) float lane[8] = {2.0f * x[i], 0, 0, 0, 0, 0, 0, 0};
    alignas(32) float e[8];
    _mm256_store_ps(e, exp256(_mm256_load_ps(lane)));
    out[i] = (e[0] - 1.0f) / (e[0] + 1.0f);
  }
}

}  // namespace csipred::kernels::detail
