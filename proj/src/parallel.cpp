#include "bowenlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace bowenlab {

namespace {
std::atomic<unsigned> g_threads{0};

unsigned resolve_threads() {
  unsigned n = g_threads.load();
  if (n == 0) {
    n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
  }
  return n;
}
}  // namespace

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() { return resolve_threads(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned workers = resolve_threads();
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  workers = std::min<std::size_t>(workers, n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          next.store(n);  // drain remaining work
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term,
                   std::size_t chunk) {
  if (chunk == 0) chunk = 1;
  std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(nchunks, 0.0);
  parallel_for(nchunks, [&](std::size_t c) {
    double s = 0.0;
    std::size_t lo = c * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[c] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;  // fixed chunk order
  return total;
}

}  // namespace bowenlab
