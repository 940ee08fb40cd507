#include "dnsd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "variants.hpp"

namespace dnsd::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(DNSD_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_default() noexcept {
  if (const char* env = std::getenv("DNSD_ISA")) {
    const std::string_view want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && avx2_table()) return avx2_table();
    if (want == "neon" && neon_table()) return neon_table();
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

const char* isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_table() noexcept {
#if defined(DNSD_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &detail::avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(DNSD_HAVE_NEON)
  return &detail::neon_kernels();
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return active().isa; }

bool force_isa(Isa isa) noexcept {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::scalar: t = &scalar_table(); break;
    case Isa::avx2: t = avx2_table(); break;
    case Isa::neon: t = neon_table(); break;
  }
  if (!t) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace dnsd::kernels
