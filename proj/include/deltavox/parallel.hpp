// Copyright Contributors to the deltavox Project
// SPDX-License-Identifier: Apache-2.0
//
// Worker-count control and a few deterministic data-parallel helpers.
//
// Every helper here splits work into contiguous index ranges and either writes
// disjoint outputs or merges results in a fixed order, so the output is the
// same for any worker count.

#ifndef DELTAVOX_PARALLEL_HPP
#define DELTAVOX_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace deltavox {

namespace detail {

inline std::atomic<int>& thread_override() {
  static std::atomic<int> value{-1};
  return value;
}

}  // namespace detail

/// Pins the worker count for the whole process. Pass -1 to fall back to the
/// DELTAVOX_THREADS environment variable.
inline void set_thread_count(int n) { detail::thread_override().store(n); }

/// Effective worker count: explicit override, then DELTAVOX_THREADS
/// (0 or unset means hardware concurrency), never less than 1.
inline int thread_count() {
  int n = detail::thread_override().load();
  if (n < 0) {
    n = 0;
    if (const char* env = std::getenv("DELTAVOX_THREADS")) {
      try {
        n = std::stoi(env);
      } catch (...) {
        n = 0;
      }
    }
  }
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::max(n, 1);
}

/// Calls fn(begin, end) over contiguous chunks of [0, n). Chunks below
/// min_chunk are not split further.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 4096) {
  if (n == 0) return;
  const std::size_t by_size = std::max<std::size_t>(1, n / std::max<std::size_t>(min_chunk, 1));
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), by_size);
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * step;
    const std::size_t end = std::min(n, begin + step);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Returns the permutation that stably sorts `keys` ascending. Ties keep
/// their original relative order, so the result is unique and independent of
/// the worker count.
inline std::vector<std::size_t> stable_sort_permutation(const std::vector<std::int64_t>& keys) {
  const std::size_t n = keys.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  auto less = [&keys](std::size_t a, std::size_t b) {
    return keys[a] < keys[b] || (keys[a] == keys[b] && a < b);
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()),
                            std::max<std::size_t>(1, n / 8192));
  if (workers <= 1) {
    std::sort(perm.begin(), perm.end(), less);
    return perm;
  }

  const std::size_t step = (n + workers - 1) / workers;
  std::vector<std::size_t> bounds;
  for (std::size_t b = 0; b < n; b += step) bounds.push_back(b);
  bounds.push_back(n);

  std::vector<std::thread> pool;
  for (std::size_t c = 0; c + 1 < bounds.size(); ++c) {
    pool.emplace_back([&, c] {
      std::sort(perm.begin() + static_cast<std::ptrdiff_t>(bounds[c]),
                perm.begin() + static_cast<std::ptrdiff_t>(bounds[c + 1]), less);
    });
  }
  for (auto& t : pool) t.join();

  // Pairwise merge of the sorted runs.
  while (bounds.size() > 2) {
    std::vector<std::size_t> next;
    for (std::size_t c = 0; c + 1 < bounds.size(); c += 2) {
      next.push_back(bounds[c]);
      if (c + 2 < bounds.size()) {
        std::inplace_merge(perm.begin() + static_cast<std::ptrdiff_t>(bounds[c]),
                           perm.begin() + static_cast<std::ptrdiff_t>(bounds[c + 1]),
                           perm.begin() + static_cast<std::ptrdiff_t>(bounds[c + 2]), less);
      }
    }
    next.push_back(n);
    bounds = std::move(next);
  }
  return perm;
}

}  // namespace deltavox

#endif  // DELTAVOX_PARALLEL_HPP
