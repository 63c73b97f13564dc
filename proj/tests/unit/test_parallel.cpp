#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "deltavox/parallel.hpp"

using namespace deltavox;

namespace {

struct ThreadGuard {
  ~ThreadGuard() {
    set_thread_count(-1);
    unsetenv("DELTAVOX_THREADS");
  }
};

}  // namespace

TEST(ThreadCount, OverrideAndEnvironment) {
  ThreadGuard guard;
  set_thread_count(3);
  EXPECT_EQ(thread_count(), 3);
  set_thread_count(-1);
  setenv("DELTAVOX_THREADS", "5", 1);
  EXPECT_EQ(thread_count(), 5);
  setenv("DELTAVOX_THREADS", "junk", 1);
  EXPECT_GE(thread_count(), 1);
  setenv("DELTAVOX_THREADS", "0", 1);
  EXPECT_GE(thread_count(), 1);
  set_thread_count(0);
  EXPECT_GE(thread_count(), 1);
}

TEST(ParallelFor, CoversRangeOnce) {
  ThreadGuard guard;
  for (int t : {1, 2, 8}) {
    set_thread_count(t);
    std::vector<int> hits(100000, 0);
    parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    }, 1000);
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}

TEST(ParallelFor, PropagatesExceptions) {
  ThreadGuard guard;
  set_thread_count(4);
  EXPECT_THROW(parallel_for(100000, [](std::size_t b, std::size_t) {
                 if (b > 0) throw std::runtime_error("boom");
               }, 1000),
               std::runtime_error);
}

TEST(StableSortPermutation, MatchesStdStableSortForAnyThreadCount) {
  ThreadGuard guard;
  std::mt19937_64 rng(5);
  std::vector<std::int64_t> keys(200000);
  for (auto& k : keys) k = static_cast<std::int64_t>(rng() % 5000);
  std::vector<std::size_t> expect(keys.size());
  std::iota(expect.begin(), expect.end(), 0);
  std::stable_sort(expect.begin(), expect.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  for (int t : {1, 2, 3, 8}) {
    set_thread_count(t);
    EXPECT_EQ(stable_sort_permutation(keys), expect) << t << " threads";
  }
  EXPECT_TRUE(stable_sort_permutation({}).empty());
}
