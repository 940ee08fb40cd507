#pragma once

// Dense double-precision kernels used by the tensor engine.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2+FMA
// variant is compiled into a separate translation unit and selected once at
// startup from CPUID; on AArch64 a NEON variant is used. The selection can be
// pinned with the DNSD_ISA environment variable ("scalar", "avx2", "neon") or
// programmatically with force_isa() (tests only).

#include <cstddef>

namespace dnsd::kernels {

enum class Isa { scalar, avx2, neon };

const char* isa_name(Isa isa) noexcept;

/// Row-major GEMM: C[m×n] (+)= op(A)·op(B) where op(A) is m×k and op(B) is k×n.
/// A is stored m×k (or k×m when trans_a), B is stored k×n (or n×k when trans_b).
using GemmFn = void (*)(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                        std::size_t k, const double* a, const double* b, double* c,
                        bool accumulate);
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x, double* y);
using DotFn = double (*)(std::size_t n, const double* x, const double* y);
using BinaryFn = void (*)(std::size_t n, const double* x, const double* y, double* out);
using ScaleFn = void (*)(std::size_t n, double alpha, const double* x, double* out);
using SumFn = double (*)(std::size_t n, const double* x);
/// True when no entry is NaN or ±Inf.
using FiniteFn = bool (*)(std::size_t n, const double* x);

struct KernelTable {
  Isa isa;
  GemmFn gemm;
  AxpyFn axpy;
  DotFn dot;
  BinaryFn add;
  BinaryFn sub;
  BinaryFn mul;
  ScaleFn scale;
  SumFn sum;
  FiniteFn all_finite;
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

/// The table every tensor op dispatches through.
const KernelTable& active() noexcept;
Isa active_isa() noexcept;

/// Returns false (and changes nothing) if `isa` is unavailable on this CPU.
bool force_isa(Isa isa) noexcept;

// Convenience wrappers over active().
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, const double* b, double* c, bool accumulate) {
  active().gemm(ta, tb, m, n, k, a, b, c, accumulate);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
  active().axpy(n, alpha, x, y);
}
inline double dot(std::size_t n, const double* x, const double* y) {
  return active().dot(n, x, y);
}
inline void add(std::size_t n, const double* x, const double* y, double* out) {
  active().add(n, x, y, out);
}
inline void sub(std::size_t n, const double* x, const double* y, double* out) {
  active().sub(n, x, y, out);
}
inline void mul(std::size_t n, const double* x, const double* y, double* out) {
  active().mul(n, x, y, out);
}
inline void scale(std::size_t n, double alpha, const double* x, double* out) {
  active().scale(n, alpha, x, out);
}
inline double sum(std::size_t n, const double* x) { return active().sum(n, x); }
inline bool all_finite(std::size_t n, const double* x) { return active().all_finite(n, x); }

}  // namespace dnsd::kernels
