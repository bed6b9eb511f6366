#ifndef BOWENLAB_PARALLEL_HPP
#define BOWENLAB_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <vector>

namespace bowenlab {

// Worker count used by parallel helpers. 0 = hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Deterministic chunked reduction: partial sums are formed over fixed
// chunks of `chunk` consecutive indices (independent of the worker count)
// and then added in chunk order, so the floating-point result is
// reproducible run to run.
double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term,
                   std::size_t chunk = 1024);

// Runs fn(i) for i in [0, n). Order of execution is unspecified; fn must be
// safe to call concurrently for distinct i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace bowenlab

#endif  // BOWENLAB_PARALLEL_HPP
