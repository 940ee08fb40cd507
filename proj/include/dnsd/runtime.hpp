#pragma once

namespace dnsd {

/// Keeps freed tensor buffers in the heap instead of returning them to the OS.
/// Training allocates and frees the same large buffers every epoch; without this
/// each of them is a fresh mmap plus page faults. No-op outside glibc.
void tune_allocator() noexcept;

}  // namespace dnsd
