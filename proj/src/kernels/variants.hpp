#pragma once

#include "dnsd/kernels.hpp"

namespace dnsd::kernels::detail {

// Defined in the ISA-specific translation units. Each returns the static table
// for its variant; callers must check CPU support before using it.
const KernelTable& avx2_kernels() noexcept;
const KernelTable& neon_kernels() noexcept;

}  // namespace dnsd::kernels::detail
