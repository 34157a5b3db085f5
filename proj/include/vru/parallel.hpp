#pragma once

#include <cstddef>
#include <functional>

namespace vru {

// Thread count from VRU_THREADS, or 1 when unset or unparsable.
std::size_t default_thread_count();

// Calls fn(i) for every i in [0, n) on up to `threads` workers. Work items must
// write to disjoint outputs; the first exception thrown is rethrown here.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace vru
