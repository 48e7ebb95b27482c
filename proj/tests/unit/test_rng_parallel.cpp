#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>

#include "lineage/error.hpp"
#include "lineage/parallel.hpp"
#include "lineage/rng.hpp"

TEST(Rng, SameSeedSameStream) {
  lineage::Rng a(5), b(5), c(6);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    (void)c;
  }
  EXPECT_NE(lineage::Rng(5).next_u64(), lineage::Rng(6).next_u64());
}

TEST(Rng, UniformAndBelowStayInRange) {
  lineage::Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.below(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  lineage::Rng rng(2);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, PermutationAndSubset) {
  lineage::Rng rng(3);
  auto p = rng.permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(p[i], i);
  const auto s = rng.subset(20, 7);
  EXPECT_EQ(s.size(), 7u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
  EXPECT_LT(s.back(), 20u);
}

TEST(Rng, MixSeedSeparatesStreams) {
  EXPECT_NE(lineage::mix_seed(1, 0), lineage::mix_seed(1, 1));
  EXPECT_NE(lineage::mix_seed(1, 0), lineage::mix_seed(2, 0));
  EXPECT_EQ(lineage::mix_seed(7, 3), lineage::mix_seed(7, 3));
}

TEST(Parallel, RunsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  lineage::parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  lineage::parallel_for(0, 4, [&](std::size_t) { FAIL(); });
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(lineage::parallel_for(100, 4,
                                     [](std::size_t i) {
                                       if (i == 37) throw lineage::Error(lineage::ErrorKind::kIo, "x");
                                     }),
               lineage::Error);
}

TEST(Parallel, ThreadCountFromEnvironment) {
  ::setenv("FINGERPRINT_THREADS", "3", 1);
  EXPECT_EQ(lineage::default_thread_count(), 3u);
  ::setenv("FINGERPRINT_THREADS", "0", 1);
  EXPECT_GE(lineage::default_thread_count(), 1u);
  ::unsetenv("FINGERPRINT_THREADS");
  EXPECT_GE(lineage::default_thread_count(), 1u);
}
