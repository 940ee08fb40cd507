#include "variants.hpp"

#include <arm_neon.h>
#include <cstring>

namespace dnsd::kernels::detail {
namespace {

inline void fma_row(std::size_t n, double alpha, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) vst1q_f64(y + j, vfmaq_f64(vld1q_f64(y + j), va, vld1q_f64(x + j)));
  for (; j < n; ++j) y[j] += alpha * x[j];
}

double dot_neon(std::size_t n, const double* x, const double* y) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_neon(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  if (!ta && !tb) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) fma_row(n, a[i * k + p], b + p * n, c + i * n);
  } else if (ta && !tb) {
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) fma_row(n, a[p * m + i], b + p * n, c + i * n);
  } else if (!ta && tb) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot_neon(k, a + i * k, b + j * k);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[j * k + p];
        c[i * n + j] += s;
      }
  }
}

void axpy_neon(std::size_t n, double alpha, const double* x, double* y) { fma_row(n, alpha, x, y); }

void add_neon(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void sub_neon(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void mul_neon(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void scale_neon(std::size_t n, double alpha, const double* x, double* out) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_n_f64(vld1q_f64(x + i), alpha));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

double sum_neon(std::size_t n, const double* x) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

bool finite_neon(std::size_t n, const double* x) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = zero;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), zero);
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * 0.0;
  return s == 0.0;
}

constexpr KernelTable kNeon{Isa::neon, gemm_neon, axpy_neon,  dot_neon, add_neon,
                            sub_neon,  mul_neon,  scale_neon, sum_neon, finite_neon};

}  // namespace

const KernelTable& neon_kernels() noexcept { return kNeon; }

}  // namespace dnsd::kernels::detail
