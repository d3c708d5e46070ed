#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace hjpatch {

// Worker count resolution: explicit request > HJPATCH_THREADS > hardware.
inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HJPATCH_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline std::size_t parallel_chunk_count(std::size_t n, unsigned threads) {
  threads = threads == 0 ? 1 : threads;
  if (threads == 1 || n < 4096) return n > 0 ? 1 : 0;
  const std::size_t chunk = (n + threads - 1) / threads;
  return (n + chunk - 1) / chunk;
}

// Static block partition of [0, n); body(chunk_index, begin, end). Results
// must not depend on the worker count: chunks are disjoint and the caller
// merges per-chunk reductions itself (max and integer sums are order-free).
// The first exception thrown by any chunk is rethrown after the join.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& body) {
  threads = threads == 0 ? 1 : threads;
  if (n == 0) return;
  if (threads == 1 || n < 4096) {
    body(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<std::exception_ptr> errors(nchunks);
  std::vector<std::thread> pool;
  pool.reserve(nchunks);
  for (std::size_t c = 0; c < nchunks; ++c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&body, &errors, c, begin, end] {
      try {
        body(c, begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace hjpatch
