#include "cvsdeblur/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur {

namespace {
std::atomic<int> g_threads{0};

int default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

void set_num_threads(int n) {
  if (n < 0) throw ValidationError("set_num_threads: negative thread count");
  g_threads.store(n);
}

int num_threads() {
  int n = g_threads.load();
  return n == 0 ? default_threads() : n;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<std::int64_t>(num_threads(), n));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers) - 1);
  for (int w = 1; w < workers; ++w) {
    const std::int64_t b = w * chunk;
    const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back(fn, b, e);
  }
  fn(0, std::min<std::int64_t>(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace cvsdeblur
