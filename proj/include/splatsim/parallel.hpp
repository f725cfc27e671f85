#pragma once

#include <cstddef>
#include <functional>

namespace splatsim {

// Worker cap used by every data-parallel loop. 0 means hardware concurrency.
void set_thread_count(unsigned count);
unsigned thread_count();

// Runs body(i) for i in [0, n). Iterations must only write to slots owned by i,
// so results never depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace splatsim
