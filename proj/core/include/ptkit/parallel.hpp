#pragma once

#include <cstddef>
#include <functional>

namespace ptkit {

// 0 means "one per logical CPU".
std::size_t resolve_workers(std::size_t requested);

// Calls fn(i) for every i in [0, n) from up to `workers` threads. The first
// exception thrown by fn is rethrown after all threads have joined.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> &fn);

} // namespace ptkit
