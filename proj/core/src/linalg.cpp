#include "lineage/linalg.hpp"

#include <cmath>
#include <string>

#include "lineage/error.hpp"
#include "lineage/parallel.hpp"

namespace lineage {
namespace {

std::vector<double> column_norms(const Matrix& columns_as_rows) {
  std::vector<double> norms(columns_as_rows.rows());
  for (std::size_t k = 0; k < columns_as_rows.rows(); ++k) {
    double s = 0.0;
    for (double x : columns_as_rows.row(k)) s += x * x;
    norms[k] = std::sqrt(s);
  }
  return norms;
}

void check_signs(std::span<const double> signs, const PartialPermutation& perm) {
  if (signs.size() != perm.source_size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "sign vector length " + std::to_string(signs.size()) +
                    " does not match permutation source size " +
                    std::to_string(perm.source_size()));
  }
  for (double s : signs) {
    if (s != 1.0 && s != -1.0) {
      throw Error(ErrorKind::kInvalidArgument, "signs must be +1 or -1");
    }
  }
}

}  // namespace

Matrix cosine_matrix(const Matrix& a, const Matrix& b, std::size_t threads) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::kShapeMismatch,
                "cosine_matrix row counts differ: " + std::to_string(a.rows()) +
                    " vs " + std::to_string(b.rows()));
  }
  if (a.rows() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "cosine_matrix needs at least one row");
  }
  const Matrix at = a.transposed();
  const Matrix bt = b.transposed();
  const auto norm_a = column_norms(at);
  const auto norm_b = column_norms(bt);

  Matrix c(a.cols(), b.cols());
  parallel_for(a.cols(), threads, [&](std::size_t k) {
    const auto col_a = at.row(k);
    for (std::size_t l = 0; l < b.cols(); ++l) {
      if (norm_a[k] == 0.0 || norm_b[l] == 0.0) {
        c(k, l) = 0.0;
        continue;
      }
      const auto col_b = bt.row(l);
      double dot = 0.0;
      for (std::size_t i = 0; i < col_a.size(); ++i) dot += col_a[i] * col_b[i];
      c(k, l) = dot / (norm_a[k] * norm_b[l]);
    }
  });
  return c;
}

Matrix gram_linear(const Matrix& x, std::size_t threads) {
  if (x.rows() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "gram_linear needs at least one row");
  }
  const std::size_t m = x.rows();
  Matrix k(m, m);
  parallel_for(m, threads, [&](std::size_t i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const auto xj = x.row(j);
      double s = 0.0;
      for (std::size_t f = 0; f < xi.size(); ++f) s += xi[f] * xj[f];
      k(i, j) = s;
    }
  });
  return k;
}

BlockRotation BlockRotation::identity(std::size_t dim) {
  if (dim % 2 != 0) {
    throw Error(ErrorKind::kInvalidArgument, "block rotation dimension must be even");
  }
  return BlockRotation(std::vector<double>(dim / 2, 0.0));
}

BlockRotation BlockRotation::inverse() const {
  std::vector<double> neg(angles_.size());
  for (std::size_t j = 0; j < angles_.size(); ++j) neg[j] = -angles_[j];
  return BlockRotation(std::move(neg));
}

Matrix BlockRotation::to_matrix() const {
  Matrix r(dim(), dim());
  for (std::size_t j = 0; j < angles_.size(); ++j) {
    const double c = std::cos(angles_[j]);
    const double s = std::sin(angles_[j]);
    r(2 * j, 2 * j) = c;
    r(2 * j, 2 * j + 1) = -s;
    r(2 * j + 1, 2 * j) = s;
    r(2 * j + 1, 2 * j + 1) = c;
  }
  return r;
}

Matrix apply_block_rotation(const Matrix& w, const BlockRotation& rotation) {
  if (w.rows() % 2 != 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "block rotation needs an even row count, got " + std::to_string(w.rows()));
  }
  if (rotation.dim() != w.rows()) {
    throw Error(ErrorKind::kInvalidArgument,
                "rotation has " + std::to_string(rotation.angles().size()) +
                    " angles for " + std::to_string(w.rows()) + " rows");
  }
  Matrix out(w.rows(), w.cols());
  const auto angles = rotation.angles();
  for (std::size_t j = 0; j < angles.size(); ++j) {
    const double c = std::cos(angles[j]);
    const double s = std::sin(angles[j]);
    const auto top = w.row(2 * j);
    const auto bottom = w.row(2 * j + 1);
    auto out_top = out.row(2 * j);
    auto out_bottom = out.row(2 * j + 1);
    for (std::size_t col = 0; col < w.cols(); ++col) {
      out_top[col] = c * top[col] - s * bottom[col];
      out_bottom[col] = s * top[col] + c * bottom[col];
    }
  }
  return out;
}

PartialPermutation::PartialPermutation(std::size_t target_size,
                                       std::vector<std::optional<std::size_t>> map)
    : target_size_(target_size), map_(std::move(map)) {
  std::vector<bool> taken(target_size_, false);
  for (const auto& t : map_) {
    if (!t) continue;
    if (*t >= target_size_) {
      throw Error(ErrorKind::kInvalidArgument,
                  "permutation target " + std::to_string(*t) + " out of range " +
                      std::to_string(target_size_));
    }
    if (taken[*t]) {
      throw Error(ErrorKind::kInvalidArgument,
                  "permutation is not injective at target " + std::to_string(*t));
    }
    taken[*t] = true;
    ++matched_;
  }
}

PartialPermutation PartialPermutation::identity(std::size_t n) {
  std::vector<std::optional<std::size_t>> map(n);
  for (std::size_t i = 0; i < n; ++i) map[i] = i;
  return PartialPermutation(n, std::move(map));
}

PartialPermutation PartialPermutation::from_full(std::span<const std::size_t> targets) {
  std::vector<std::optional<std::size_t>> map(targets.begin(), targets.end());
  return PartialPermutation(targets.size(), std::move(map));
}

PartialPermutation PartialPermutation::inverse() const {
  std::vector<std::optional<std::size_t>> inv(target_size_);
  for (std::size_t s = 0; s < map_.size(); ++s) {
    if (map_[s]) inv[*map_[s]] = s;
  }
  return PartialPermutation(map_.size(), std::move(inv));
}

Matrix apply_perm_sign_columns(const Matrix& w, const PartialPermutation& perm,
                               std::span<const double> signs) {
  if (perm.source_size() != w.cols()) {
    throw Error(ErrorKind::kShapeMismatch,
                "permutation source size " + std::to_string(perm.source_size()) +
                    " does not match " + std::to_string(w.cols()) + " columns");
  }
  check_signs(signs, perm);
  Matrix out(w.rows(), perm.target_size());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto in_row = w.row(r);
    auto out_row = out.row(r);
    for (std::size_t k = 0; k < perm.source_size(); ++k) {
      if (const auto t = perm[k]) out_row[*t] = signs[k] * in_row[k];
    }
  }
  return out;
}

Matrix apply_perm_sign_rows(const Matrix& w, const PartialPermutation& perm,
                            std::span<const double> signs) {
  if (perm.source_size() != w.rows()) {
    throw Error(ErrorKind::kShapeMismatch,
                "permutation source size " + std::to_string(perm.source_size()) +
                    " does not match " + std::to_string(w.rows()) + " rows");
  }
  check_signs(signs, perm);
  Matrix out(perm.target_size(), w.cols());
  for (std::size_t k = 0; k < perm.source_size(); ++k) {
    const auto t = perm[k];
    if (!t) continue;
    const auto in_row = w.row(k);
    auto out_row = out.row(*t);
    for (std::size_t c = 0; c < w.cols(); ++c) out_row[c] = signs[k] * in_row[c];
  }
  return out;
}

}  // namespace lineage
