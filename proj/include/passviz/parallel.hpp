#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace passviz {

/// Worker count from PASSVIZ_WORKERS, else hardware concurrency (min 1).
unsigned default_workers();

/// Runs fn(begin, end) over disjoint contiguous chunks of [0, n).
///
/// Chunks are handed out in fixed-size blocks, so which worker handles a
/// block never affects results as long as fn writes only to its own range.
/// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, std::size_t block, Fn&& fn) {
  if (n == 0) return;
  block = std::max<std::size_t>(block, 1);
  const std::size_t blocks = (n + block - 1) / block;
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, blocks));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b * block, std::min(n, (b + 1) * block));
    return;
  }

  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto work = [&] {
    for (;;) {
      std::size_t b;
      {
        std::lock_guard lock(mu);
        if (failure || next >= blocks) return;
        b = next++;
      }
      try {
        fn(b * block, std::min(n, (b + 1) * block));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace passviz
