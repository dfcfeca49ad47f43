#pragma once

// Low-level numeric kernels behind the tensor ops. Every kernel has a scalar
// reference implementation; the hot float32 paths additionally have AVX2
// variants selected once at startup from CPUID. Within one ISA all kernels
// are bitwise deterministic (fixed accumulation order, no cross-thread
// reductions); scalar and AVX2 results may differ in low-order bits because
// the vector paths use FMA and lane-wise partial sums.

#include <cstdint>
#include <string>

namespace csipred::kernels {

enum class Isa { scalar, avx2 };

// ISA picked at startup (best supported). force_isa overrides it, primarily
// so tests can run both variants on the same machine.
Isa active_isa();
void force_isa(Isa isa);
void reset_isa();
std::string isa_name(Isa isa);
bool cpu_supports_avx2();

// Number of worker threads intra-kernel parallel sections may use.
// Parallel partitions are over disjoint output rows, so results are bitwise
// identical for any thread count.
int thread_count();
void set_thread_count(int n);

// Row-major GEMM family, C is m x n.
//   nn: C (+)= A[m x k] * B[k x n]
//   nt: C (+)= A[m x k] * B[n x k]^T
//   tn: C (+)= A[k x m]^T ... i.e. C[m x n] (+)= sum_r A[r x m](r,i) * B[r x n](r,j)
// with `acc` false the kernel overwrites C.
void gemm_nn_f32(bool acc, int64_t m, int64_t n, int64_t k,
                 const float* a, int64_t lda, const float* b, int64_t ldb,
                 float* c, int64_t ldc);
void gemm_nt_f32(bool acc, int64_t m, int64_t n, int64_t k,
                 const float* a, int64_t lda, const float* b, int64_t ldb,
                 float* c, int64_t ldc);
void gemm_tn_f32(bool acc, int64_t m, int64_t n, int64_t r,
                 const float* a, int64_t lda, const float* b, int64_t ldb,
                 float* c, int64_t ldc);

void gemm_nn_f64(bool acc, int64_t m, int64_t n, int64_t k,
                 const double* a, int64_t lda, const double* b, int64_t ldb,
                 double* c, int64_t ldc);
void gemm_nt_f64(bool acc, int64_t m, int64_t n, int64_t k,
                 const double* a, int64_t lda, const double* b, int64_t ldb,
                 double* c, int64_t ldc);
void gemm_tn_f64(bool acc, int64_t m, int64_t n, int64_t r,
                 const double* a, int64_t lda, const double* b, int64_t ldb,
                 double* c, int64_t ldc);

// Elementwise.
void add_f32(int64_t n, const float* a, const float* b, float* out);
void sub_f32(int64_t n, const float* a, const float* b, float* out);
void mul_f32(int64_t n, const float* a, const float* b, float* out);
void axpy_f32(int64_t n, float alpha, const float* x, float* y);
void affine_f32(int64_t n, float alpha, float beta, const float* x, float* out);
float reduce_sum_f32(int64_t n, const float* x);

void add_f64(int64_t n, const double* a, const double* b, double* out);
void sub_f64(int64_t n, const double* a, const double* b, double* out);
void mul_f64(int64_t n, const double* a, const double* b, double* out);
void axpy_f64(int64_t n, double alpha, const double* x, double* y);
void affine_f64(int64_t n, double alpha, double beta, const double* x, double* out);
double reduce_sum_f64(int64_t n, const double* x);

// In-place Adam update for one parameter block. m/v are the first/second
// moment accumulators, c1 = 1/(1-beta1^t), c2 = 1/(1-beta2^t).
void adam_update_f32(int64_t n, float* p, const float* g, float* m, float* v,
                     float lr, float beta1, float beta2, float eps,
                     float c1, float c2);
void adam_update_f64(int64_t n, double* p, const double* g, double* m, double* v,
                     double lr, double beta1, double beta2, double eps,
                     double c1, double c2);

// Row-wise stabilized softmax: each of the `rows` contiguous rows of length
// `n` is mapped to exp(x - max)/sum.
void softmax_rows_f32(int64_t rows, int64_t n, const float* x, float* out);
void softmax_rows_f64(int64_t rows, int64_t n, const double* x, double* out);

// Elementwise logistic sigmoid and tanh.
void sigmoid_f32(int64_t n, const float* x, float* out);
void sigmoid_f64(int64_t n, const double* x, double* out);
void tanh_f32(int64_t n, const float* x, float* out);
void tanh_f64(int64_t n, const double* x, double* out);

// Templated entry points used by the tensor layer.
template <typename Real>
void gemm_nn(bool acc, int64_t m, int64_t n, int64_t k, const Real* a, int64_t lda,
             const Real* b, int64_t ldb, Real* c, int64_t ldc);
template <typename Real>
void gemm_nt(bool acc, int64_t m, int64_t n, int64_t k, const Real* a, int64_t lda,
             const Real* b, int64_t ldb, Real* c, int64_t ldc);
template <typename Real>
void gemm_tn(bool acc, int64_t m, int64_t n, int64_t r, const Real* a, int64_t lda,
             const Real* b, int64_t ldb, Real* c, int64_t ldc);
template <typename Real>
void add(int64_t n, const Real* a, const Real* b, Real* out);
template <typename Real>
void sub(int64_t n, const Real* a, const Real* b, Real* out);
template <typename Real>
void mul(int64_t n, const Real* a, const Real* b, Real* out);
template <typename Real>
void axpy(int64_t n, Real alpha, const Real* x, Real* y);
template <typename Real>
void affine(int64_t n, Real alpha, Real beta, const Real* x, Real* out);
template <typename Real>
Real reduce_sum(int64_t n, const Real* x);
template <typename Real>
void adam_update(int64_t n, Real* p, const Real* g, Real* m, Real* v, Real lr,
                 Real beta1, Real beta2, Real eps, Real c1, Real c2);
template <typename Real>
void softmax_rows(int64_t rows, int64_t n, const Real* x, Real* out);
template <typename Real>
void sigmoid(int64_t n, const Real* x, Real* out);
template <typename Real>
void tanh_map(int64_t n, const Real* x, Real* out);

// clang-format off
template <> inline void gemm_nn<float>(bool acc, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) { gemm_nn_f32(acc, m, n, k, a, lda, b, ldb, c, ldc); }
template <> inline void gemm_nn<double>(bool acc, int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc) { gemm_nn_f64(acc, m, n, k, a, lda, b, ldb, c, ldc); }
template <> inline void gemm_nt<float>(bool acc, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) { gemm_nt_f32(acc, m, n, k, a, lda, b, ldb, c, ldc); }
template <> inline void gemm_nt<double>(bool acc, int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc) { gemm_nt_f64(acc, m, n, k, a, lda, b, ldb, c, ldc); }
template <> inline void gemm_tn<float>(bool acc, int64_t m, int64_t n, int64_t r, const float* a, int64_t lda, const float* b, int64_t ldb, float* c, int64_t ldc) { gemm_tn_f32(acc, m, n, r, a, lda, b, ldb, c, ldc); }
template <> inline void gemm_tn<double>(bool acc, int64_t m, int64_t n, int64_t r, const double* a, int64_t lda, const double* b, int64_t ldb, double* c, int64_t ldc) { gemm_tn_f64(acc, m, n, r, a, lda, b, ldb, c, ldc); }
template <> inline void add<float>(int64_t n, const float* a, const float* b, float* out) { add_f32(n, a, b, out); }
template <> inline void add<double>(int64_t n, const double* a, const double* b, double* out) { add_f64(n, a, b, out); }
template <> inline void sub<float>(int64_t n, const float* a, const float* b, float* out) { sub_f32(n, a, b, out); }
template <> inline void sub<double>(int64_t n, const double* a, const double* b, double* out) { sub_f64(n, a, b, out); }
template <> inline void mul<float>(int64_t n, const float* a, const float* b, float* out) { mul_f32(n, a, b, out); }
template <> inline void mul<double>(int64_t n, const double* a, const double* b, double* out) { mul_f64(n, a, b, out); }
template <> inline void axpy<float>(int64_t n, float alpha, const float* x, float* y) { axpy_f32(n, alpha, x, y); }
template <> inline void axpy<double>(int64_t n, double alpha, const double* x, double* y) { axpy_f64(n, alpha, x, y); }
template <> inline void affine<float>(int64_t n, float alpha, float beta, const float* x, float* out) { affine_f32(n, alpha, beta, x, out); }
template <> inline void affine<double>(int64_t n, double alpha, double beta, const double* x, double* out) { affine_f64(n, alpha, beta, x, out); }
template <> inline float reduce_sum<float>(int64_t n, const float* x) { return reduce_sum_f32(n, x); }
template <> inline double reduce_sum<double>(int64_t n, const double* x) { return reduce_sum_f64(n, x); }
template <> inline void adam_update<float>(int64_t n, float* p, const float* g, float* m, float* v, float lr, float beta1, float beta2, float eps, float c1, float c2) { adam_update_f32(n, p, g, m, v, lr, beta1, beta2, eps, c1, c2); }
template <> inline void adam_update<double>(int64_t n, double* p, const double* g, double* m, double* v, double lr, double beta1, double beta2, double eps, double c1, double c2) { adam_update_f64(n, p, g, m, v, lr, beta1, beta2, eps, c1, c2); }
template <> inline void softmax_rows<float>(int64_t rows, int64_t n, const float* x, float* out) { softmax_rows_f32(rows, n, x, out); }
template <> inline void softmax_rows<double>(int64_t rows, int64_t n, const double* x, double* out) { softmax_rows_f64(rows, n, x, out); }
template <> inline void sigmoid<float>(int64_t n, const float* x, float* out) { sigmoid_f32(n, x, out); }
template <> inline void sigmoid<double>(int64_t n, const double* x, double* out) { sigmoid_f64(n, x, out); }
template <> inline void tanh_map<float>(int64_t n, const float* x, float* out) { tanh_f32(n, x, out); }
template <> inline void tanh_map<double>(int64_t n, const double* x, double* out) { tanh_f64(n, x, out); }
// clang-format on

}  // namespace csipred::kernels
