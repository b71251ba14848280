#pragma once

// Thread fan-out with results that do not depend on the thread count.
// Reductions are split into a fixed number of chunks whose partial sums are
// combined in chunk order.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace ibflow {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

/// Number of worker threads. Defaults to IBFLOW_THREADS or 1.
inline int thread_count() {
  int n = detail::thread_setting().load();
  if (n > 0) return n;
  if (const char* env = std::getenv("IBFLOW_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

inline void set_thread_count(int n) { detail::thread_setting().store(std::max(n, 0)); }

inline constexpr std::size_t kReductionChunks = 64;

/// Calls body(begin, end) on contiguous sub-ranges of [0, n).
inline void parallel_ranges(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                            std::size_t grain = 4096) {
  const int workers = thread_count();
  if (workers <= 1 || n < grain) {
    body(0, n);
    return;
  }
  const std::size_t parts = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(parts);
  for (std::size_t t = 0; t < parts; ++t) {
    const std::size_t b = n * t / parts;
    const std::size_t e = n * (t + 1) / parts;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& th : pool) th.join();
}

/// Deterministic sum of term(i) over [0, n).
template <class Term>
double deterministic_sum(std::size_t n, Term&& term) {
  std::array<double, kReductionChunks> partial{};
  auto run_chunks = [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c) {
      const std::size_t b = n * c / kReductionChunks;
      const std::size_t e = n * (c + 1) / kReductionChunks;
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) s += term(i);
      partial[c] = s;
    }
  };
  if (thread_count() <= 1 || n < 4096) {
    run_chunks(0, kReductionChunks);
  } else {
    parallel_ranges(kReductionChunks, run_chunks, 1);
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

}  // namespace ibflow
