#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace isohash {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> value{0};
  return value;
}
}  // namespace detail

/// Worker count used when nothing was set explicitly: ISOHASH_THREADS, then the
/// hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("ISOHASH_THREADS"); env != nullptr && *env != '\0') {
    try {
      const long parsed = std::stol(env);
      if (parsed > 0) return static_cast<unsigned>(parsed);
    } catch (const std::exception&) {
    }
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

inline void set_thread_count(unsigned n) { detail::thread_setting().store(n); }

inline unsigned thread_count() {
  const unsigned n = detail::thread_setting().load();
  return n == 0 ? default_thread_count() : n;
}

/// Runs fn(task) for task in [0, n_tasks). Tasks are claimed dynamically, so fn must only
/// write to task-private state; callers combine the per-task results in task order, which keeps
/// every reduction independent of the worker count.
template <class Fn>
void parallel_for(std::size_t n_tasks, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= n_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Splits [0, n) into fixed-size chunks; chunk boundaries never depend on the thread count.
struct ChunkPlan {
  std::size_t total = 0;
  std::size_t chunk = 1;

  std::size_t count() const { return total == 0 ? 0 : (total + chunk - 1) / chunk; }
  std::size_t begin(std::size_t c) const { return c * chunk; }
  std::size_t end(std::size_t c) const { return std::min(total, (c + 1) * chunk); }
};

/// Reduces n_chunks chunk results in chunk order. Chunks run in parallel waves, so only a
/// bounded number of partial results is alive at once: make() creates an empty partial,
/// work(partial, chunk) fills it, merge(partial) folds it into the caller's accumulator.
template <class Make, class Work, class Merge>
void ordered_reduce(std::size_t n_chunks, Make&& make, Work&& work, Merge&& merge) {
  const std::size_t wave = std::max<std::size_t>(1, 4 * static_cast<std::size_t>(thread_count()));
  for (std::size_t first = 0; first < n_chunks; first += wave) {
    const std::size_t n = std::min(wave, n_chunks - first);
    std::vector<decltype(make())> parts;
    parts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) parts.push_back(make());
    parallel_for(n, [&](std::size_t k) { work(parts[k], first + k); });
    for (auto& part : parts) merge(part);
  }
}

/// splitmix64 finalizer; used to derive independent per-chunk seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return mix_seed(mix_seed(a) ^ b); }

}  // namespace isohash
