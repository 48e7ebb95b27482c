#pragma once

#include <cstddef>

#include "lineage/matrix.hpp"

namespace lineage {

/// Non-owning view of two symmetric m x m Gram matrices over the same m
/// samples. Construction validates shape and symmetry (1e-10, relative to
/// entry magnitude above 1); the matrices must outlive the view.
class KernelPair {
 public:
  KernelPair(const Matrix& k1, const Matrix& k2);

  const Matrix& first() const noexcept { return *k1_; }
  const Matrix& second() const noexcept { return *k2_; }
  std::size_t samples() const noexcept { return k1_->rows(); }

 private:
  const Matrix* k1_;
  const Matrix* k2_;
};

/// tr(K1 H K2 H) / (m-1)^2 with H the centering matrix (never formed).
double hsic_biased(const KernelPair& pair);

/// Unbiased HSIC on the diagonal-zeroed kernels; needs m >= 4, may be negative.
double hsic_unbiased(const KernelPair& pair);

/// Unbiased CKA with linear kernels before clamping. Rows are samples.
/// Throws kDegenerate when either self-HSIC is not positive.
double ucka_unclamped(const Matrix& x1, const Matrix& x2);

/// ucka_unclamped clamped to [-1, 1].
double ucka(const Matrix& x1, const Matrix& x2);

/// Biased CKA with linear kernels, in [0, 1].
double cka_biased(const Matrix& x1, const Matrix& x2);

}  // namespace lineage
