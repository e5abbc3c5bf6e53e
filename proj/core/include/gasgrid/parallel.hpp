#pragma once

#include <cstddef>
#include <functional>

namespace gasgrid {

/// Worker count: GASGRID_THREADS if set, else the hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n); exceptions are rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace gasgrid
