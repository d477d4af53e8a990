#pragma once

#include <cstddef>
#include <functional>

namespace cmls {

/// Worker count for data-parallel loops. Initialised from CMLS_THREADS
/// (default 1); values below 1 are treated as 1.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Splits [0, n) into contiguous chunks, one per worker, and calls
/// fn(begin, end) for each. Returns after every chunk finished. The first
/// exception thrown by any chunk is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace cmls
