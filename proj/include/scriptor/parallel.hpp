#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace scriptor {

// Worker count: SCRIPTOR_THREADS when set, otherwise machine parallelism.
inline unsigned thread_budget() {
  if (const char* env = std::getenv("SCRIPTOR_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

// Runs f(i) for i in [0, count) across the thread budget. Each index must
// touch only its own output slot; reduction order is the caller's job.
template <typename F>
void parallel_for(std::size_t count, F&& f) {
  const unsigned workers = std::min<std::size_t>(thread_budget(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) f(i);
    });
  for (std::thread& th : pool) th.join();
}

}  // namespace scriptor
