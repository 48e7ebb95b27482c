#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lineage/error.hpp"
#include "lineage/kernel_alignment.hpp"
#include "lineage/linalg.hpp"
#include "lineage/rng.hpp"
#include "oracles.hpp"

using lineage::KernelPair;
using lineage::Matrix;
using lineage::Rng;

namespace {

Matrix scaled_rotated(const Matrix& x, double c, Rng& rng) {
  std::vector<double> angles(x.cols() / 2);
  for (auto& a : angles) a = rng.uniform(-std::numbers::pi, std::numbers::pi);
  Matrix y = lineage::apply_block_rotation(x.transposed(), lineage::BlockRotation(angles))
                 .transposed();
  for (auto& v : y.data()) v *= c;
  return y;
}

Matrix constant_offdiag(std::size_t m, double c) {
  Matrix k(m, m, c);
  for (std::size_t i = 0; i < m; ++i) k(i, i) = 1.0;
  return k;
}

}  // namespace

TEST(HsicBiased, ZeroKernelGivesZero) {
  const Matrix z(4, 4, 0.0);
  EXPECT_EQ(lineage::hsic_biased(KernelPair(z, z)), 0.0);
}

TEST(HsicBiased, TwoByTwoIdentityGivesOne) {
  const Matrix k = Matrix::identity(2);
  EXPECT_NEAR(lineage::hsic_biased(KernelPair(k, k)), 1.0, 1e-15);
}

TEST(HsicBiased, MatchesDefinitionalOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_gram(6, 3, rng);
    const Matrix b = oracle::random_gram(6, 4, rng);
    EXPECT_NEAR(lineage::hsic_biased(KernelPair(a, b)), oracle::hsic_biased_definitional(a, b),
                1e-12);
  }
}

TEST(HsicBiased, NonnegativeOnEqualKernels) {
  Rng rng(60);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_gram(5, 2, rng);
    EXPECT_GE(lineage::hsic_biased(KernelPair(a, a)), 0.0);
  }
}

TEST(KernelPairView, RejectsAsymmetricAndMismatchedKernels) {
  Matrix a = Matrix::identity(4);
  a(0, 1) = 0.5;
  const Matrix b = Matrix::identity(4);
  EXPECT_THROW(KernelPair(a, b), lineage::Error);
  EXPECT_THROW(KernelPair(b, Matrix::identity(5)), lineage::Error);
  EXPECT_THROW(KernelPair(Matrix(3, 4), Matrix(3, 4)), lineage::Error);
}

TEST(HsicBiased, RequiresTwoSamples) {
  const Matrix k = Matrix::identity(1);
  EXPECT_THROW(lineage::hsic_biased(KernelPair(k, k)), lineage::Error);
}

TEST(HsicUnbiased, ConstantOffDiagonalKernelGivesZero) {
  for (double c : {0.0, 0.3, -2.0, 7.5}) {
    const Matrix k = constant_offdiag(4, c);
    EXPECT_NEAR(lineage::hsic_unbiased(KernelPair(k, k)), 0.0, 1e-12) << c;
    EXPECT_NEAR(oracle::hsic_unbiased_ustat(k, k), 0.0, 1e-12) << c;
  }
}

TEST(HsicUnbiased, BiasedEstimateExceedsUnbiasedOnConstantKernel) {
  const Matrix k = constant_offdiag(4, 0.5);
  EXPECT_GT(lineage::hsic_biased(KernelPair(k, k)), lineage::hsic_unbiased(KernelPair(k, k)));
}

TEST(HsicUnbiased, RequiresFourSamples) {
  const Matrix k = Matrix::identity(3);
  try {
    lineage::hsic_unbiased(KernelPair(k, k));
    FAIL();
  } catch (const lineage::Error& e) {
    EXPECT_EQ(e.kind(), lineage::ErrorKind::kInvalidArgument);
  }
}

TEST(HsicUnbiased, MatchesScalarOracles) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 4 + rng.below(6);
    const Matrix a = oracle::random_gram(m, 1 + rng.below(5), rng);
    const Matrix b = oracle::random_gram(m, 1 + rng.below(5), rng);
    const double value = lineage::hsic_unbiased(KernelPair(a, b));
    EXPECT_NEAR(value, oracle::hsic_unbiased_terms(a, b), 1e-12);
    EXPECT_NEAR(value, oracle::hsic_unbiased_ustat(a, b), 1e-11);
  }
}

TEST(HsicUnbiased, IgnoresDiagonal) {
  Rng rng(81);
  const Matrix a = oracle::random_gram(7, 3, rng);
  const Matrix b = oracle::random_gram(7, 3, rng);
  Matrix a2 = a;
  for (std::size_t i = 0; i < 7; ++i) a2(i, i) += 10.0 * static_cast<double>(i);
  EXPECT_NEAR(lineage::hsic_unbiased(KernelPair(a, b)), lineage::hsic_unbiased(KernelPair(a2, b)),
              1e-12);
}

TEST(Ucka, SelfSimilarityIsOne) {
  Rng rng(3);
  const Matrix x = oracle::random_matrix(12, 5, rng);
  EXPECT_NEAR(lineage::ucka(x, x), 1.0, 1e-14);
  EXPECT_NEAR(lineage::cka_biased(x, x), 1.0, 1e-14);
}

TEST(Ucka, InvariantToScaleAndBlockRotation) {
  Rng rng(37);
  const Matrix x = oracle::random_matrix(20, 8, rng);
  const Matrix y = scaled_rotated(x, -3.7, rng);
  EXPECT_NEAR(lineage::ucka(x, y), 1.0, 1e-9);
  EXPECT_NEAR(lineage::cka_biased(x, y), 1.0, 1e-9);
}

TEST(Ucka, IndependentInputsStaySmallAndMatchOracle) {
  Rng rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = oracle::random_matrix(64, 16, rng);
    const Matrix b = oracle::random_matrix(64, 16, rng);
    const double value = lineage::ucka(a, b);
    EXPECT_LT(std::abs(value), 0.2);
    EXPECT_NEAR(value, oracle::ucka(a, b), 1e-12);
  }
}

TEST(Ucka, SymmetricInArguments) {
  Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(10, 3, rng);
    const Matrix b = oracle::random_matrix(10, 6, rng);
    EXPECT_NEAR(lineage::ucka(a, b), lineage::ucka(b, a), 1e-12);
  }
}

TEST(Ucka, RowPermutationEquivariance) {
  Rng rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(15, 4, rng);
    const Matrix b = oracle::random_matrix(15, 7, rng);
    const auto perm = rng.permutation(15);
    EXPECT_NEAR(lineage::ucka(a, b), lineage::ucka(a.select_rows(perm), b.select_rows(perm)),
                1e-12);
  }
}

TEST(Ucka, ClampedRangeAndSmallExcess) {
  Rng rng(46);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 4 + rng.below(20);
    const std::size_t n = 2 * (1 + rng.below(3));
    const Matrix a = oracle::random_matrix(m, n, rng);
    const Matrix b = trial % 2 ? scaled_rotated(a, rng.uniform(0.1, 4.0), rng)
                               : oracle::random_matrix(m, n, rng);
    const double raw = lineage::ucka_unclamped(a, b);
    const double clamped = lineage::ucka(a, b);
    EXPECT_LE(std::abs(raw) - 1.0, 1e-9);
    EXPECT_GE(clamped, -1.0);
    EXPECT_LE(clamped, 1.0);
  }
}

TEST(Ucka, DegenerateInputThrows) {
  // Rows that are all identical make every off-diagonal kernel entry equal.
  const Matrix x(6, 3, 1.0);
  Rng rng(1);
  const Matrix y = oracle::random_matrix(6, 3, rng);
  try {
    lineage::ucka(x, y);
    FAIL();
  } catch (const lineage::Error& e) {
    EXPECT_EQ(e.kind(), lineage::ErrorKind::kDegenerate);
  }
}

TEST(Ucka, RowCountMismatchAndTooFewSamples) {
  EXPECT_THROW(lineage::ucka(Matrix(5, 2, 1.0), Matrix(6, 2, 1.0)), lineage::Error);
  EXPECT_THROW(lineage::ucka(Matrix::identity(3), Matrix::identity(3)), lineage::Error);
}

TEST(Ucka, DroppingFeaturesDegradesGracefully) {
  Rng rng(90);
  const std::size_t d = 16;
  double total_full = 0, total_some = 0, total_many = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = oracle::random_matrix(64, d, rng);
    std::vector<std::size_t> keep12(12), keep6(6);
    for (std::size_t i = 0; i < 12; ++i) keep12[i] = i;
    for (std::size_t i = 0; i < 6; ++i) keep6[i] = i;
    total_full += lineage::ucka(x, x);
    total_some += lineage::ucka(x, x.select_cols(keep12));
    total_many += lineage::ucka(x, x.select_cols(keep6));
  }
  EXPECT_GT(total_full, total_some);
  EXPECT_GT(total_some, total_many);
  EXPECT_GT(total_many / 20.0, 0.3);
}
