#pragma once

// Process-level allocator tuning for the training binaries.

#include <cstddef>  // defines __GLIBC__ on glibc systems

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace eeg2vec {

/// Keeps large tensor buffers on the heap instead of fresh mmap pages, which
/// otherwise get zero-filled by the kernel on every batch.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace eeg2vec
