#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lineage/matrix.hpp"

namespace lineage {

/// Column-wise cosine similarities: C(k, l) = <A_:k, B_:l> / (|A_:k| |B_:l|).
/// A zero-norm column contributes 0 to every entry it touches.
/// Rows of C may be computed on several workers; each entry has a fixed
/// summation order, so the result is bitwise independent of `threads`.
Matrix cosine_matrix(const Matrix& a, const Matrix& b, std::size_t threads = 1);

/// Linear-kernel Gram matrix X X^T.
Matrix gram_linear(const Matrix& x, std::size_t threads = 1);

/// Block-diagonal rotation diag(R(psi_0), R(psi_1), ...) with 2x2 blocks
/// acting on row pairs (2j, 2j+1). Commutes with RoPE's position rotations.
class BlockRotation {
 public:
  BlockRotation() = default;
  explicit BlockRotation(std::vector<double> angles) : angles_(std::move(angles)) {}

  static BlockRotation identity(std::size_t dim);

  std::span<const double> angles() const noexcept { return angles_; }
  std::size_t dim() const noexcept { return 2 * angles_.size(); }
  BlockRotation inverse() const;
  Matrix to_matrix() const;

 private:
  std::vector<double> angles_;
};

/// R * W for a d x n matrix W.
Matrix apply_block_rotation(const Matrix& w, const BlockRotation& rotation);

/// Injective map from source indices 0..source_size-1 into
/// 0..target_size-1; unmatched sources map to nullopt.
class PartialPermutation {
 public:
  PartialPermutation() = default;
  PartialPermutation(std::size_t target_size, std::vector<std::optional<std::size_t>> map);

  static PartialPermutation identity(std::size_t n);
  static PartialPermutation from_full(std::span<const std::size_t> targets);

  std::size_t source_size() const noexcept { return map_.size(); }
  std::size_t target_size() const noexcept { return target_size_; }
  std::size_t matched_count() const noexcept { return matched_; }
  std::optional<std::size_t> operator[](std::size_t source) const { return map_.at(source); }
  std::span<const std::optional<std::size_t>> map() const noexcept { return map_; }

  PartialPermutation inverse() const;

  bool operator==(const PartialPermutation&) const = default;

 private:
  std::size_t target_size_ = 0;
  std::size_t matched_ = 0;
  std::vector<std::optional<std::size_t>> map_;
};

/// W P D: output column perm(k) = signs[k] * W column k. Target columns that
/// receive no source are zero. `signs` is indexed by source column.
Matrix apply_perm_sign_columns(const Matrix& w, const PartialPermutation& perm,
                               std::span<const double> signs);

/// D^T P^T W: output row perm(k) = signs[k] * W row k.
Matrix apply_perm_sign_rows(const Matrix& w, const PartialPermutation& perm,
                            std::span<const double> signs);

}  // namespace lineage
