#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace polsqz {

// Worker count: POLSQZ_THREADS caps it, default is machine parallelism.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("POLSQZ_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

// Static index partition; results must be written by index so the output is
// identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned nw = worker_count();
  if (nw <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  nw = std::min<std::size_t>(nw, n);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (unsigned w = 0; w < nw; ++w) {
    pool.emplace_back([=, &fn] {
      for (std::size_t i = w; i < n; i += nw) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace polsqz
