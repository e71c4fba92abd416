#include "av/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace av {

size_t max_threads() {
  static const size_t cap = [] {
    size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("AVROBUST_THREADS")) {
      long v = std::strtol(env, nullptr, 10);
      if (v > 0) hw = std::min<size_t>(hw, static_cast<size_t>(v));
    }
    return hw;
  }();
  return cap;
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
  size_t workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    size_t lo = n * w / workers;
    size_t hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace av
