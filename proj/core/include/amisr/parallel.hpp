#pragma once

#include <cstdint>
#include <functional>

namespace amisr {

// Worker cap: AMISR_THREADS if set, else the hardware concurrency.
int worker_count();
void set_worker_count(int n);

// True when AMISR_DETERMINISTIC=1 or set_deterministic(true) was called.
// All reductions in this library already use a fixed order; the flag is
// recorded in configs and logs so runs declare the mode they relied on.
bool deterministic_mode();
void set_deterministic(bool on);

// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs; the
// result is then independent of the worker count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace amisr
