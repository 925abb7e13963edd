#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace zadre {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs f(i) for i in [0, n_items). Work items must be independent; results
// must not depend on which worker runs which item.
template <typename F>
void parallel_for(std::size_t n_items, int threads, F&& f) {
  const int workers = std::min<std::size_t>(resolve_threads(threads), n_items);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_items; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_items || failed.load()) return;
      try {
        f(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace zadre
