#pragma once

// Deterministic fan-out over independent work items.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qtherm {

/// requested = 0 means QTHERM_THREADS if set, else all hardware threads.
/// A set QTHERM_THREADS also caps an explicit request.
inline unsigned worker_count(unsigned requested) {
  long env_cap = 0;
  if (const char* env = std::getenv("QTHERM_THREADS")) env_cap = std::strtol(env, nullptr, 10);
  unsigned n = requested;
  if (n == 0) n = env_cap >= 1 ? static_cast<unsigned>(env_cap) : std::thread::hardware_concurrency();
  if (env_cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(env_cap));
  return std::max(1u, n);
}

/// Runs body(k) for k in [0, n) on up to `threads` workers; results must be
/// written to per-index slots so the outcome is independent of scheduling.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(worker_count(threads), std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= n) return;
        try {
          body(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace qtherm
