#include "lineage/kernel_alignment.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lineage/error.hpp"
#include "lineage/linalg.hpp"

namespace lineage {
namespace {

void check_square_symmetric(const Matrix& k, const char* name) {
  if (k.rows() != k.cols()) {
    throw Error(ErrorKind::kShapeMismatch, std::string(name) + " is not square");
  }
  for (std::size_t i = 0; i < k.rows(); ++i) {
    for (std::size_t j = i + 1; j < k.cols(); ++j) {
      const double a = k(i, j);
      const double b = k(j, i);
      const double scale = std::max({1.0, std::abs(a), std::abs(b)});
      if (!(std::abs(a - b) <= 1e-10 * scale)) {
        throw Error(ErrorKind::kInvalidArgument,
                    std::string(name) + " is not symmetric at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
      }
    }
  }
}

void check_samples(const Matrix& x1, const Matrix& x2, std::size_t minimum) {
  if (x1.rows() != x2.rows()) {
    throw Error(ErrorKind::kShapeMismatch,
                "sample counts differ: " + std::to_string(x1.rows()) + " vs " +
                    std::to_string(x2.rows()));
  }
  if (x1.rows() < minimum) {
    throw Error(ErrorKind::kInvalidArgument,
                "need at least " + std::to_string(minimum) + " samples, got " +
                    std::to_string(x1.rows()));
  }
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

KernelPair::KernelPair(const Matrix& k1, const Matrix& k2) : k1_(&k1), k2_(&k2) {
  check_square_symmetric(k1, "first kernel");
  check_square_symmetric(k2, "second kernel");
  if (k1.rows() != k2.rows()) {
    throw Error(ErrorKind::kShapeMismatch, "kernels have different sample counts");
  }
}

double hsic_biased(const KernelPair& pair) {
  const std::size_t m = pair.samples();
  if (m < 2) {
    throw Error(ErrorKind::kInvalidArgument, "biased HSIC needs m >= 2");
  }
  const Matrix& k1 = pair.first();
  const Matrix& k2 = pair.second();

  // (H K1 H)_ij = K1_ij - rowmean_i - colmean_j + grandmean; K1 is symmetric.
  std::vector<double> row_mean(m, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (double x : k1.row(i)) s += x;
    row_mean[i] = s / static_cast<double>(m);
    grand += s;
  }
  grand /= static_cast<double>(m * m);

  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      trace += (k1(i, j) - row_mean[i] - row_mean[j] + grand) * k2(i, j);
    }
  }
  const double denom = static_cast<double>(m - 1) * static_cast<double>(m - 1);
  return trace / denom;
}

double hsic_unbiased(const KernelPair& pair) {
  const std::size_t m = pair.samples();
  if (m < 4) {
    throw Error(ErrorKind::kInvalidArgument,
                "unbiased HSIC needs m >= 4, got " + std::to_string(m));
  }
  const Matrix& k1 = pair.first();
  const Matrix& k2 = pair.second();

  double trace_term = 0.0;  // tr(K1~ K2~)
  double sum1 = 0.0;        // 1' K1~ 1
  double sum2 = 0.0;
  double cross = 0.0;  // 1' K1~ K2~ 1 = (K1~ 1) . (K2~ 1)
  for (std::size_t i = 0; i < m; ++i) {
    double r1 = 0.0;
    double r2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double a = k1(i, j);
      const double b = k2(i, j);
      trace_term += a * b;
      r1 += a;
      r2 += b;
    }
    sum1 += r1;
    sum2 += r2;
    cross += r1 * r2;
  }
  const double md = static_cast<double>(m);
  const double bracket = trace_term + sum1 * sum2 / ((md - 1.0) * (md - 2.0)) -
                         2.0 / (md - 2.0) * cross;
  return bracket / (md * (md - 3.0));
}

double ucka_unclamped(const Matrix& x1, const Matrix& x2) {
  check_samples(x1, x2, 4);
  const Matrix k1 = gram_linear(x1);
  const Matrix k2 = gram_linear(x2);
  const double self1 = hsic_unbiased(KernelPair(k1, k1));
  const double self2 = hsic_unbiased(KernelPair(k2, k2));
  if (!(self1 > 0.0) || !(self2 > 0.0)) {
    throw Error(ErrorKind::kDegenerate,
                "UCKA denominator is not positive (near-constant samples?)");
  }
  return hsic_unbiased(KernelPair(k1, k2)) / std::sqrt(self1 * self2);
}

double ucka(const Matrix& x1, const Matrix& x2) { return clamp_unit(ucka_unclamped(x1, x2)); }

double cka_biased(const Matrix& x1, const Matrix& x2) {
  check_samples(x1, x2, 2);
  const Matrix k1 = gram_linear(x1);
  const Matrix k2 = gram_linear(x2);
  const double self1 = hsic_biased(KernelPair(k1, k1));
  const double self2 = hsic_biased(KernelPair(k2, k2));
  if (!(self1 > 0.0) || !(self2 > 0.0)) {
    throw Error(ErrorKind::kDegenerate, "CKA denominator is zero");
  }
  return std::clamp(hsic_biased(KernelPair(k1, k2)) / std::sqrt(self1 * self2), 0.0, 1.0);
}

}  // namespace lineage
