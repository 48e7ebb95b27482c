#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lineage/linalg.hpp"
#include "lineage/matrix.hpp"
#include "lineage/weights_io.hpp"

namespace lineage {

/// Embedding rows of the tokens both vocabularies share, ordered by token
/// string; rows_a[i] and rows_b[i] belong to the same token.
struct SharedRows {
  std::vector<std::size_t> rows_a;
  std::vector<std::size_t> rows_b;
};

SharedRows shared_vocab_rows(const Vocab& a, const Vocab& b);

/// Recovered P and D: A's hidden column k lands on B's column perm[k] with
/// sign signs[k]. Unmatched columns (pruning) carry sign +1.
struct ColumnAlignment {
  PartialPermutation perm;
  std::vector<double> signs;
  double mean_abs_cosine = 0.0;
};

/// Cosine matrix between embedding columns, maximum |C| assignment, signs
/// read off the matched cosines (sign(0) = +1).
ColumnAlignment extract_alignment(const Matrix& emb_a_shared, const Matrix& emb_b_shared,
                                  std::size_t threads = 1);

struct LayerScore {
  double s_q = 0.0;
  double s_k = 0.0;
};

/// UCKA between the aligned hidden-dim samples of two layers' Q and K:
/// A-side sample j is signs[k] * (column k of W_A), B-side sample j is
/// column perm[k] of W_B, for the j-th matched k.
LayerScore layer_similarity(const LayerWeights& a, const LayerWeights& b,
                            const ColumnAlignment& alignment);

/// Maximum-weight pairing of layers from an L_A x L_B score matrix.
std::vector<std::pair<std::size_t, std::size_t>> pair_layers(const Matrix& scores);

struct LayerComparison {
  std::size_t layer_a = 0;
  std::size_t layer_b = 0;
  double s_q = 0.0;
  double s_k = 0.0;
  /// UCKA denominator vanished; the pair contributes 0.
  bool degenerate = false;
};

struct SimilarityReport {
  std::vector<LayerComparison> per_layer;
  std::vector<std::pair<std::size_t, std::size_t>> layer_map;
  double similarity = 0.0;
  ColumnAlignment alignment;
  std::size_t shared_vocab_size = 0;
};

struct CompareOptions {
  /// Workers for per-layer UCKA and the cosine matrix; 0 = FINGERPRINT_THREADS/auto.
  std::size_t threads = 1;
};

/// Full detection pipeline. Equal depths compare layer l with layer l; unequal
/// depths score every layer pair and keep the maximum-weight pairing. The
/// similarity averages (|s_Q| + |s_K|) / 2 over the matched pairs.
SimilarityReport compare(const WeightBundle& a, const WeightBundle& b,
                         const CompareOptions& options = {});

}  // namespace lineage
