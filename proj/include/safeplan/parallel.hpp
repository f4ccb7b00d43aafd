#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace safeplan {

/// Runs fn(begin, end, worker) over `count` items split into contiguous blocks,
/// one block per worker. Worker w always receives the same block for a given
/// (count, threads), so per-worker partial results can be merged in worker order.
template <typename Fn>
void parallel_blocks(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads < 1 ? 1 : threads, count));
  if (workers == 1) {
    fn(std::size_t{0}, count, std::size_t{0});
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = count * w / workers;
      const std::size_t end = count * (w + 1) / workers;
      pool.emplace_back([&, begin, end, w] {
        try {
          fn(begin, end, w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::size_t worker_count(std::size_t count, int threads) {
  return std::max<std::size_t>(1, std::min<std::size_t>(threads < 1 ? 1 : threads, count));
}

}  // namespace safeplan
