#include "calib/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace calib {

namespace {
std::atomic<int> g_threads{0};
}

void set_default_threads(int n) { g_threads.store(n); }

int default_threads() {
  int n = g_threads.load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  int threads) {
  if (threads <= 0) threads = default_threads();
  if (threads == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::size_t nw = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    std::size_t lo = count * w / nw;
    std::size_t hi = count * (w + 1) / nw;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace calib
