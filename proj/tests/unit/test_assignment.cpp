#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "lineage/assignment.hpp"
#include "lineage/error.hpp"
#include "lineage/rng.hpp"
#include "oracles.hpp"

using lineage::Assignment;
using lineage::Matrix;
using lineage::Rng;
using Matches = std::vector<std::pair<std::size_t, std::size_t>>;

namespace {

double weight_of(const Matrix& w, const Matches& m) {
  double s = 0;
  for (auto [r, c] : m) s += w(r, c);
  return s;
}

void expect_valid(const Matrix& w, const Assignment& a) {
  ASSERT_EQ(a.matches.size(), std::min(w.rows(), w.cols()));
  std::vector<bool> rows(w.rows()), cols(w.cols());
  for (std::size_t i = 0; i < a.matches.size(); ++i) {
    const auto [r, c] = a.matches[i];
    ASSERT_LT(r, w.rows());
    ASSERT_LT(c, w.cols());
    EXPECT_FALSE(rows[r]);
    EXPECT_FALSE(cols[c]);
    rows[r] = cols[c] = true;
    if (i > 0) EXPECT_LT(a.matches[i - 1].first, r);
  }
  EXPECT_EQ(a.total_weight, weight_of(w, a.matches));
}

// Small integer weights produce many exact ties.
Matrix tie_heavy(std::size_t p, std::size_t q, Rng& rng) {
  Matrix w(p, q);
  for (auto& x : w.data()) x = static_cast<double>(rng.below(3));
  return w;
}

}  // namespace

TEST(Assignment, DominantDiagonal) {
  const Matrix w{{2, 1}, {1, 2}};
  const Assignment a = lineage::solve_max_assignment(w);
  EXPECT_EQ(a.matches, (Matches{{0, 0}, {1, 1}}));
  EXPECT_EQ(a.total_weight, 4.0);
}

TEST(Assignment, SingleRow) {
  const Assignment a = lineage::solve_max_assignment(Matrix{{5, 7, 6}});
  EXPECT_EQ(a.matches, (Matches{{0, 1}}));
  EXPECT_EQ(a.total_weight, 7.0);
}

TEST(Assignment, SingleColumn) {
  const Assignment a = lineage::solve_max_assignment(Matrix{{5}, {7}, {6}});
  EXPECT_EQ(a.matches, (Matches{{1, 0}}));
}

TEST(Assignment, BruteForceTrivialCases) {
  EXPECT_EQ(lineage::brute_force_assignment(Matrix{{1}}).total_weight, 1.0);
  const Assignment zeros = lineage::brute_force_assignment(Matrix(2, 2, 0.0));
  EXPECT_EQ(zeros.total_weight, 0.0);
  EXPECT_EQ(zeros.matches, (Matches{{0, 0}, {1, 1}}));
  EXPECT_EQ(lineage::solve_max_assignment(Matrix(2, 2, 0.0)).matches, zeros.matches);
}

TEST(Assignment, BruteForceRandom3x5MatchesEnumeration) {
  Rng rng(35);
  const Matrix w = oracle::random_matrix(3, 5, rng);
  EXPECT_NEAR(lineage::brute_force_assignment(w).total_weight, oracle::max_assignment_weight(w),
              1e-12);
}

TEST(Assignment, Random7x7MatchesBruteForce) {
  Rng rng(77);
  const Matrix w = oracle::random_matrix(7, 7, rng);
  const Assignment fast = lineage::solve_max_assignment(w);
  const Assignment slow = lineage::brute_force_assignment(w);
  expect_valid(w, fast);
  EXPECT_EQ(fast.total_weight, slow.total_weight);
  EXPECT_EQ(fast.matches, slow.matches);
}

TEST(Assignment, PropertyMatchesBruteForceOnRectangularInstances) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t p = 1 + rng.below(7);
    const std::size_t q = 1 + rng.below(7);
    const Matrix w = trial % 2 ? oracle::random_matrix(p, q, rng) : tie_heavy(p, q, rng);
    const Assignment fast = lineage::solve_max_assignment(w);
    const Assignment slow = lineage::brute_force_assignment(w);
    expect_valid(w, fast);
    expect_valid(w, slow);
    EXPECT_EQ(fast.total_weight, slow.total_weight) << "trial " << trial;
    EXPECT_EQ(fast.matches, slow.matches) << "tie rule differs, trial " << trial;
    EXPECT_NEAR(slow.total_weight, oracle::max_assignment_weight(w), 1e-12);
  }
}

TEST(Assignment, ConstantShiftAndPositiveScaleKeepArgAssignment) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const Matrix w = oracle::random_matrix(n, n, rng);
    const Matches base = lineage::solve_max_assignment(w).matches;
    Matrix shifted = w;
    for (auto& x : shifted.data()) x += 3.25;
    Matrix scaled = w;
    for (auto& x : scaled.data()) x *= 0.37;
    EXPECT_EQ(lineage::solve_max_assignment(shifted).matches, base);
    EXPECT_EQ(lineage::solve_max_assignment(scaled).matches, base);
  }
}

TEST(Assignment, UniformMatrixPairsInOrder) {
  const Assignment a = lineage::solve_max_assignment(Matrix(3, 5, 0.5));
  EXPECT_EQ(a.matches, (Matches{{0, 0}, {1, 1}, {2, 2}}));
  const Assignment t = lineage::solve_max_assignment(Matrix(5, 3, 0.5));
  EXPECT_EQ(t.matches, (Matches{{0, 0}, {1, 1}, {2, 2}}));
}

TEST(Assignment, RejectsNonFiniteAndEmpty) {
  Matrix w(2, 2, 1.0);
  w(1, 0) = NAN;
  EXPECT_THROW(lineage::solve_max_assignment(w), lineage::Error);
  w(1, 0) = INFINITY;
  EXPECT_THROW(lineage::brute_force_assignment(w), lineage::Error);
  EXPECT_THROW(lineage::solve_max_assignment(Matrix()), lineage::Error);
}

TEST(Assignment, BruteForceRejectsLargeInstances) {
  EXPECT_THROW(lineage::brute_force_assignment(Matrix(9, 9, 1.0)), lineage::Error);
  EXPECT_NO_THROW(lineage::brute_force_assignment(Matrix(2, 12, 1.0)));
}

TEST(Assignment, Dense512SolvesQuickly) {
  Rng rng(512);
  Matrix w(512, 512);
  for (auto& x : w.data()) x = rng.uniform();
  const auto start = std::chrono::steady_clock::now();
  const Assignment a = lineage::solve_max_assignment(w);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect_valid(w, a);
  EXPECT_LT(secs, 10.0);
}

TEST(Assignment, PermutedIdentityIsRecovered) {
  Rng rng(12);
  const auto perm = rng.permutation(50);
  Matrix w(50, 50, 0.1);
  for (std::size_t i = 0; i < 50; ++i) w(i, perm[i]) = 1.0;
  const Assignment a = lineage::solve_max_assignment(w);
  for (auto [r, c] : a.matches) EXPECT_EQ(c, perm[r]);
}
