#pragma once

#include <cstddef>
#include <functional>

namespace fedcvlc {

// Worker count from VLC_THREADS; unset or 0 means hardware concurrency.
int thread_count();

// Runs body(i) for i in [0, n) on up to thread_count() threads. Calls made
// from inside a worker run serially. The exception from the smallest failing
// index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fedcvlc
