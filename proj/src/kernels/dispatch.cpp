// Runtime ISA selection for the float32 kernels. The best supported variant
// is picked once; tests exercise both paths through force_isa().

#include <atomic>
#include <stdexcept>
#include <thread>

#include "csipred/kernels/kernels.hpp"

namespace csipred::kernels {

namespace detail {

// Scalar reference variants (kernels_scalar.cpp).
void gemm_nn_f32_scalar(bool, int64_t, int64_t, int64_t, const float*, int64_t, const float*, int64_t, float*, int64_t);
void gemm_nt_f32_scalar(bool, int64_t, int64_t, int64_t, const float*, int64_t, const float*, int64_t, float*, int64_t);
void gemm_tn_f32_scalar(bool, int64_t, int64_t, int64_t, const float*, int64_t, const float*, int64_t, float*, int64_t);
void add_f32_scalar(int64_t, const float*, const float*, float*);
void sub_f32_scalar(int64_t, const float*, const float*, float*);
void mul_f32_scalar(int64_t, const float*, const float*, float*);
void axpy_f32_scalar(int64_t, float, const float*, float*);
void affine_f32_scalar(int64_t, float, float, const float*, float*);
float reduce_sum_f32_scalar(int64_t, const float*);
void adam_update_f32_scalar(int64_t, float*, const float*, float*, float*, float, float, float, float, float, float);
void softmax_rows_f32_scalar(int64_t, int64_t, const float*, float*);
void sigmoid_f32_scalar(int64_t, const float*, float*);
void tanh_f32_scalar(int64_t, const float*, float*);

#ifdef CSIPRED_HAVE_AVX2
// AVX2 variants (kernels_avx2.cpp).
void gemm_nn_f32_avx2(bool, int64_t, int64_t, int64_t, const float*, int64_t, const float*, int64_t, float*, int64_t);
void gemm_nt_f32_avx2(bool, int64_t, int64_t, int64_t, const float*, int64_t, const float*, int64_t, float*, int64_t);
void gemm_tn_f32_avx2(bool, int64_t, int64_t, int64_t, const float*, int64_t, const float*, int64_t, float*, int64_t);
void add_f32_avx2(int64_t, const float*, const float*, float*);
void sub_f32_avx2(int64_t, const float*, const float*, float*);
void mul_f32_avx2(int64_t, const float*, const float*, float*);
void axpy_f32_avx2(int64_t, float, const float*, float*);
void affine_f32_avx2(int64_t, float, float, const float*, float*);
float reduce_sum_f32_avx2(int64_t, const float*);
void adam_update_f32_avx2(int64_t, float*, const float*, float*, float*, float, float, float, float, float, float);
void softmax_rows_f32_avx2(int64_t, int64_t, const float*, float*);
void sigmoid_f32_avx2(int64_t, const float*, float*);
void tanh_f32_avx2(int64_t, const float*, float*);
#endif

}  // namespace detail

namespace {

struct KernelTable {
  decltype(&detail::gemm_nn_f32_scalar) gemm_nn;
  decltype(&detail::gemm_nt_f32_scalar) gemm_nt;
  decltype(&detail::gemm_tn_f32_scalar) gemm_tn;
  decltype(&detail::add_f32_scalar) add;
  decltype(&detail::sub_f32_scalar) sub;
  decltype(&detail::mul_f32_scalar) mul;
  decltype(&detail::axpy_f32_scalar) axpy;
  decltype(&detail::affine_f32_scalar) affine;
  decltype(&detail::reduce_sum_f32_scalar) reduce_sum;
  decltype(&detail::adam_update_f32_scalar) adam_update;
  decltype(&detail::softmax_rows_f32_scalar) softmax_rows;
  decltype(&detail::sigmoid_f32_scalar) sigmoid;
  decltype(&detail::tanh_f32_scalar) tanh_map;
};

constexpr KernelTable kScalarTable = {
    detail::gemm_nn_f32_scalar, detail::gemm_nt_f32_scalar, detail::gemm_tn_f32_scalar,
    detail::add_f32_scalar,     detail::sub_f32_scalar,     detail::mul_f32_scalar,
    detail::axpy_f32_scalar,    detail::affine_f32_scalar,  detail::reduce_sum_f32_scalar,
    detail::adam_update_f32_scalar, detail::softmax_rows_f32_scalar,
    detail::sigmoid_f32_scalar,     detail::tanh_f32_scalar,
};

#ifdef CSIPRED_HAVE_AVX2
constexpr KernelTable kAvx2Table = {
    detail::gemm_nn_f32_avx2, detail::gemm_nt_f32_avx2, detail::gemm_tn_f32_avx2,
    detail::add_f32_avx2,     detail::sub_f32_avx2,     detail::mul_f32_avx2,
    detail::axpy_f32_avx2,    detail::affine_f32_avx2,  detail::reduce_sum_f32_avx2,
    detail::adam_update_f32_avx2, detail::softmax_rows_f32_avx2,
    detail::sigmoid_f32_avx2,     detail::tanh_f32_avx2,
};
#endif

Isa detect_best_isa() {
  return cpu_supports_avx2() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa> g_isa{detect_best_isa()};
std::atomic<const KernelTable*> g_table{cpu_supports_avx2()
#ifdef CSIPRED_HAVE_AVX2
                                            ? &kAvx2Table
#else
                                            ? &kScalarTable
#endif
                                            : &kScalarTable};

std::atomic<int> g_threads{[] {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw > 8 ? 8 : hw);
}()};

const KernelTable& table() { return *g_table.load(std::memory_order_relaxed); }

}  // namespace

bool cpu_supports_avx2() {
#if defined(CSIPRED_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::avx2) {
#ifdef CSIPRED_HAVE_AVX2
    if (!cpu_supports_avx2()) throw std::runtime_error("AVX2 not supported on this CPU");
    g_table.store(&kAvx2Table, std::memory_order_relaxed);
#else
    throw std::runtime_error("AVX2 kernels not built");
#endif
  } else {
    g_table.store(&kScalarTable, std::memory_order_relaxed);
  }
  g_isa.store(isa, std::memory_order_relaxed);
}

void reset_isa() { force_isa(detect_best_isa()); }

std::string isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

int thread_count() { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

void gemm_nn_f32(bool acc, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda,
                 const float* b, int64_t ldb, float* c, int64_t ldc) {
  table().gemm_nn(acc, m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_nt_f32(bool acc, int64_t m, int64_t n, int64_t k, const float* a, int64_t lda,
                 const float* b, int64_t ldb, float* c, int64_t ldc) {
  table().gemm_nt(acc, m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_tn_f32(bool acc, int64_t m, int64_t n, int64_t r, const float* a, int64_t lda,
                 const float* b, int64_t ldb, float* c, int64_t ldc) {
  table().gemm_tn(acc, m, n, r, a, lda, b, ldb, c, ldc);
}
void add_f32(int64_t n, const float* a, const float* b, float* out) { table().add(n, a, b, out); }
void sub_f32(int64_t n, const float* a, const float* b, float* out) { table().sub(n, a, b, out); }
void mul_f32(int64_t n, const float* a, const float* b, float* out) { table().mul(n, a, b, out); }
void axpy_f32(int64_t n, float alpha, const float* x, float* y) { table().axpy(n, alpha, x, y); }
void affine_f32(int64_t n, float alpha, float beta, const float* x, float* out) {
  table().affine(n, alpha, beta, x, out);
}
float reduce_sum_f32(int64_t n, const float* x) { return table().reduce_sum(n, x); }
void adam_update_f32(int64_t n, float* p, const float* g, float* m, float* v, float lr,
                     float beta1, float beta2, float eps, float c1, float c2) {
  table().adam_update(n, p, g, m, v, lr, beta1, beta2, eps, c1, c2);
}
void softmax_rows_f32(int64_t rows, int64_t n, const float* x, float* out) {
  table().softmax_rows(rows, n, x, out);
}
void sigmoid_f32(int64_t n, const float* x, float* out) { table().sigmoid(n, x, out); }
void tanh_f32(int64_t n, const float* x, float* out) { table().tanh_map(n, x, out); }

}  // namespace csipred::kernels
