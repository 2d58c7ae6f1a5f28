#pragma once

#include <cstddef>
#include <functional>

namespace djcm {

// Worker count: DJCM_THREADS if set to a positive integer, else all cores.
unsigned worker_count();

// Runs body(i) for i in [0, count) across up to worker_count() threads.
// Callers must make body(i) depend only on i so results do not depend on
// scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace djcm
