#include "lineage/fingerprint.hpp"

#include <cmath>
#include <string>

#include "lineage/assignment.hpp"
#include "lineage/error.hpp"
#include "lineage/kernel_alignment.hpp"
#include "lineage/parallel.hpp"

namespace lineage {
namespace {

struct AlignedSamples {
  Matrix a;
  Matrix b;
};

AlignedSamples aligned_samples(const Matrix& wa, const Matrix& wb, const ColumnAlignment& align,
                               const char* name) {
  if (wa.cols() != align.perm.source_size() || wb.cols() != align.perm.target_size()) {
    throw Error(ErrorKind::kShapeMismatch,
                std::string(name) + " widths do not match the embedding alignment");
  }
  const std::size_t matched = align.perm.matched_count();
  AlignedSamples s{Matrix(matched, wa.rows()), Matrix(matched, wb.rows())};
  std::size_t j = 0;
  for (std::size_t k = 0; k < align.perm.source_size(); ++k) {
    const auto t = align.perm[k];
    if (!t) continue;
    for (std::size_t f = 0; f < wa.rows(); ++f) s.a(j, f) = align.signs[k] * wa(f, k);
    for (std::size_t f = 0; f < wb.rows(); ++f) s.b(j, f) = wb(f, *t);
    ++j;
  }
  return s;
}

LayerComparison score_pair(const WeightBundle& a, const WeightBundle& b,
                           const ColumnAlignment& align, std::size_t la, std::size_t lb) {
  LayerComparison cmp{la, lb};
  try {
    const LayerScore s = layer_similarity(a.layers[la], b.layers[lb], align);
    cmp.s_q = s.s_q;
    cmp.s_k = s.s_k;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kDegenerate) throw;
    cmp.degenerate = true;
  }
  return cmp;
}

double pair_score(const LayerComparison& c) { return (std::abs(c.s_q) + std::abs(c.s_k)) / 2.0; }

}  // namespace

SharedRows shared_vocab_rows(const Vocab& a, const Vocab& b) {
  SharedRows rows;
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  auto ia = ea.begin();
  auto ib = eb.begin();
  while (ia != ea.end() && ib != eb.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      rows.rows_a.push_back(ia->second);
      rows.rows_b.push_back(ib->second);
      ++ia;
      ++ib;
    }
  }
  if (rows.rows_a.empty()) {
    throw Error(ErrorKind::kEmptyIntersection, "the vocabularies share no tokens");
  }
  return rows;
}

ColumnAlignment extract_alignment(const Matrix& emb_a_shared, const Matrix& emb_b_shared,
                                  std::size_t threads) {
  if (emb_a_shared.rows() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "alignment needs at least 2 shared tokens");
  }
  const Matrix cos = cosine_matrix(emb_a_shared, emb_b_shared, threads);
  Matrix magnitude(cos.rows(), cos.cols());
  for (std::size_t i = 0; i < cos.size(); ++i) magnitude.data()[i] = std::abs(cos.data()[i]);
  const Assignment assignment = solve_max_assignment(magnitude);

  ColumnAlignment align;
  std::vector<std::optional<std::size_t>> map(cos.rows());
  align.signs.assign(cos.rows(), 1.0);
  for (const auto& [k, t] : assignment.matches) {
    map[k] = t;
    align.signs[k] = cos(k, t) < 0.0 ? -1.0 : 1.0;
  }
  align.perm = PartialPermutation(cos.cols(), std::move(map));
  align.mean_abs_cosine =
      assignment.total_weight / static_cast<double>(assignment.matches.size());
  return align;
}

LayerScore layer_similarity(const LayerWeights& a, const LayerWeights& b,
                            const ColumnAlignment& alignment) {
  if (alignment.perm.matched_count() < 4) {
    throw Error(ErrorKind::kInvalidArgument,
                "need at least 4 matched hidden dims, got " +
                    std::to_string(alignment.perm.matched_count()));
  }
  const AlignedSamples q = aligned_samples(a.q, b.q, alignment, "q");
  const AlignedSamples k = aligned_samples(a.k, b.k, alignment, "k");
  return {ucka(q.a, q.b), ucka(k.a, k.b)};
}

std::vector<std::pair<std::size_t, std::size_t>> pair_layers(const Matrix& scores) {
  return solve_max_assignment(scores).matches;
}

SimilarityReport compare(const WeightBundle& a, const WeightBundle& b,
                         const CompareOptions& options) {
  if (a.layers.empty() || b.layers.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "both bundles need at least one layer");
  }
  const SharedRows shared = shared_vocab_rows(a.vocab, b.vocab);
  SimilarityReport report;
  report.shared_vocab_size = shared.rows_a.size();
  report.alignment = extract_alignment(a.embedding.select_rows(shared.rows_a),
                                       b.embedding.select_rows(shared.rows_b), options.threads);

  const std::size_t la = a.layers.size();
  const std::size_t lb = b.layers.size();
  if (la == lb) {
    report.per_layer.resize(la);
    parallel_for(la, options.threads, [&](std::size_t l) {
      report.per_layer[l] = score_pair(a, b, report.alignment, l, l);
    });
    for (std::size_t l = 0; l < la; ++l) report.layer_map.emplace_back(l, l);
  } else {
    std::vector<LayerComparison> all(la * lb);
    parallel_for(all.size(), options.threads, [&](std::size_t idx) {
      all[idx] = score_pair(a, b, report.alignment, idx / lb, idx % lb);
    });
    Matrix scores(la, lb);
    for (std::size_t idx = 0; idx < all.size(); ++idx) {
      scores(idx / lb, idx % lb) = pair_score(all[idx]);
    }
    report.layer_map = pair_layers(scores);
    for (const auto& [i, j] : report.layer_map) report.per_layer.push_back(all[i * lb + j]);
  }

  double total = 0.0;
  std::size_t usable = 0;
  for (const auto& c : report.per_layer) {
    total += std::abs(c.s_q) + std::abs(c.s_k);
    if (!c.degenerate) ++usable;
  }
  if (usable == 0) {
    throw Error(ErrorKind::kDegenerate, "UCKA is degenerate for every matched layer");
  }
  report.similarity = total / (2.0 * static_cast<double>(report.per_layer.size()));
  return report;
}

}  // namespace lineage
