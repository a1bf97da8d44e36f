#ifndef ZIMED_PARALLEL_HPP
#define ZIMED_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace zimed {

inline int default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs body(i) for i in [0, count) on up to `threads` workers. Work is handed
// out dynamically, so body must write only to slot i of any shared output.
// The first exception thrown by any body is rethrown after all workers stop.
template <class Body> void parallel_for(int count, int threads, Body &&body) {
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i)
      body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count)
        return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back(worker);
  for (auto &t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace zimed

#endif
