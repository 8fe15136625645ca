#pragma once

#include <cstddef>
#include <functional>

namespace attnparse {

/// Worker count used when a caller passes 0; defaults to the number of
/// logical cores.
std::size_t default_threads() noexcept;
void set_default_threads(std::size_t n) noexcept;

/// Calls fn(i) for i in [0, count) on up to `threads` workers. Callers write
/// results by index, so output order never depends on scheduling. If any call
/// throws, the exception of the lowest index is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace attnparse
