#include "dnsd/runtime.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace dnsd {

void tune_allocator() noexcept {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace dnsd
