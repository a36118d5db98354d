#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace radap::core {

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Static block partition over [0, count). Each index must be independent;
// results keyed by index stay deterministic regardless of thread count.
inline void parallel_for(int count, const std::function<void(int)>& body, int threads = 0) {
  if (threads <= 0) threads = hardware_threads();
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace radap::core
