#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace icsysid {

// Static round-robin split of [0, n) over a bounded pool. Each index writes
// only its own output slots, so the schedule cannot change results; the first
// worker exception is rethrown after the join.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int pool_size = std::min(threads, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(pool_size);
  pool.reserve(pool_size);
  for (int w = 0; w < pool_size; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += pool_size) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace icsysid
