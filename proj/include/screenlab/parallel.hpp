#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace screenlab {

// Worker count for `tasks` independent jobs; requested <= 0 means hardware concurrency.
inline int worker_count(int requested, int tasks) {
  const int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::clamp(n, 1, std::max(1, tasks));
}

// Runs body(i) for i in [0, tasks). Each task must write only to its own slot; the
// caller reduces in index order, so results do not depend on scheduling.
template <class Body>
void parallel_for(int tasks, int workers, Body&& body) {
  if (workers <= 1) {
    for (int i = 0; i < tasks; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < tasks; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace screenlab
