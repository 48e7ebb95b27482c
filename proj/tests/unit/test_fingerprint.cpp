#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lineage/error.hpp"
#include "lineage/fingerprint.hpp"
#include "lineage/forge.hpp"
#include "lineage/rng.hpp"
#include "oracles.hpp"

using lineage::ColumnAlignment;
using lineage::ForgeConfig;
using lineage::ManipulationSpec;
using lineage::Matrix;
using lineage::Rng;
using lineage::Vocab;
using lineage::WeightBundle;
using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

namespace {

ForgeConfig desk(std::uint64_t seed) {
  ForgeConfig c;
  c.vocab_size = 256;
  c.hidden = 64;
  c.layers = 3;
  c.head_dim = 16;
  c.ffn_dim = 128;
  c.seed = seed;
  return c;
}

ForgeConfig small(std::uint64_t seed, std::size_t layers = 3) {
  ForgeConfig c;
  c.layers = layers;
  c.seed = seed;
  return c;
}

ManipulationSpec planted(std::uint64_t seed, double scale = 0.5) {
  ManipulationSpec s;
  s.scale = scale;
  s.perm_seed = seed;
  s.sign_seed = seed + 1;
  s.rotation_seed = seed + 2;
  return s;
}

}  // namespace

TEST(SharedVocab, IdenticalVocabsListEveryRowInTokenOrder) {
  const Vocab v = Vocab::sequential(12);
  const auto rows = lineage::shared_vocab_rows(v, v);
  EXPECT_EQ(rows.rows_a, rows.rows_b);
  ASSERT_EQ(rows.rows_a.size(), 12u);
  // "t0" < "t1" < "t10" < "t11" < "t2" ...
  EXPECT_EQ(rows.rows_a[0], 0u);
  EXPECT_EQ(rows.rows_a[1], 1u);
  EXPECT_EQ(rows.rows_a[2], 10u);
  EXPECT_EQ(rows.rows_a[3], 11u);
  EXPECT_EQ(rows.rows_a[4], 2u);
}

TEST(SharedVocab, HandIntersection) {
  const Vocab a({{"x", 0}, {"y", 1}, {"z", 2}});
  const Vocab b({{"y", 0}, {"q", 1}, {"x", 2}});
  const auto rows = lineage::shared_vocab_rows(a, b);
  EXPECT_EQ(rows.rows_a, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(rows.rows_b, (std::vector<std::size_t>{2, 0}));
}

TEST(SharedVocab, DisjointVocabsThrow) {
  const Vocab a({{"a", 0}});
  const Vocab b({{"b", 0}});
  try {
    lineage::shared_vocab_rows(a, b);
    FAIL();
  } catch (const lineage::Error& e) {
    EXPECT_EQ(e.kind(), lineage::ErrorKind::kEmptyIntersection);
  }
}

TEST(Alignment, IdenticalEmbeddingsGiveIdentity) {
  Rng rng(1);
  const Matrix e = oracle::random_matrix(30, 8, rng);
  const ColumnAlignment a = lineage::extract_alignment(e, e);
  EXPECT_EQ(a.perm, lineage::PartialPermutation::identity(8));
  EXPECT_EQ(a.signs, std::vector<double>(8, 1.0));
  EXPECT_NEAR(a.mean_abs_cosine, 1.0, 1e-12);
}

TEST(Alignment, RecoversPairSwapWithNegativeScale) {
  Rng rng(2);
  const Matrix e = oracle::random_matrix(40, 8, rng);
  Matrix b(40, 8);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t k = 0; k < 8; ++k) b(i, k ^ 1u) = -2.5 * e(i, k);
  const ColumnAlignment a = lineage::extract_alignment(e, b);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(a.perm[k], std::optional<std::size_t>(k ^ 1u));
    EXPECT_EQ(a.signs[k], -1.0);
  }
  EXPECT_NEAR(a.mean_abs_cosine, 1.0, 1e-12);
}

TEST(Alignment, IndependentEmbeddingsHaveLowCosine) {
  Rng rng(3);
  for (int seed = 0; seed < 50; ++seed) {
    const Matrix a = oracle::random_matrix(100, 16, rng);
    const Matrix b = oracle::random_matrix(100, 16, rng);
    EXPECT_LT(lineage::extract_alignment(a, b).mean_abs_cosine, 0.5);
  }
}

TEST(Alignment, ZeroCosineGetsPositiveSign) {
  const Matrix a{{1, 0}, {0, 1}};
  const Matrix b{{0, 0}, {0, 0}};
  const ColumnAlignment al = lineage::extract_alignment(a, b);
  EXPECT_EQ(al.signs, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(al.mean_abs_cosine, 0.0);
}

TEST(Alignment, NeedsTwoRows) {
  EXPECT_THROW(lineage::extract_alignment(Matrix(1, 3, 1.0), Matrix(1, 3, 1.0)), lineage::Error);
}

TEST(LayerSimilarity, IdenticalLayersScoreOne) {
  const WeightBundle b = lineage::generate_base(small(1));
  ColumnAlignment id{lineage::PartialPermutation::identity(16), std::vector<double>(16, 1.0), 1.0};
  const auto s = lineage::layer_similarity(b.layers[0], b.layers[0], id);
  EXPECT_NEAR(s.s_q, 1.0, 1e-12);
  EXPECT_NEAR(s.s_k, 1.0, 1e-12);
}

TEST(LayerSimilarity, RotatedScaledPermutedQueryScoresOne) {
  const WeightBundle base = lineage::generate_base(small(2));
  const auto plan = lineage::plan_manipulation(base, planted(20, -1.7));
  const WeightBundle b = lineage::apply_manipulation(base, planted(20, -1.7));
  ColumnAlignment truth{plan.perm, plan.signs, 1.0};
  for (std::size_t l = 0; l < 3; ++l) {
    const auto s = lineage::layer_similarity(base.layers[l], b.layers[l], truth);
    EXPECT_NEAR(s.s_q, 1.0, 1e-8);
    EXPECT_NEAR(s.s_k, 1.0, 1e-8);
  }
}

TEST(LayerSimilarity, IndependentLayersScoreLow) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const WeightBundle a = lineage::generate_base(desk(100 + 2 * seed));
    const WeightBundle b = lineage::generate_base(desk(101 + 2 * seed));
    const auto rows = lineage::shared_vocab_rows(a.vocab, b.vocab);
    const ColumnAlignment al = lineage::extract_alignment(a.embedding.select_rows(rows.rows_a),
                                                          b.embedding.select_rows(rows.rows_b));
    const auto s = lineage::layer_similarity(a.layers[0], b.layers[0], al);
    EXPECT_LT(std::abs(s.s_q), 0.3);
    EXPECT_LT(std::abs(s.s_k), 0.3);
  }
}

TEST(LayerSimilarity, TooFewMatchedDimsThrows) {
  const WeightBundle b = lineage::generate_base(small(1));
  std::vector<std::optional<std::size_t>> map(16);
  for (std::size_t k = 0; k < 3; ++k) map[k] = k;
  ColumnAlignment three{lineage::PartialPermutation(16, map), std::vector<double>(16, 1.0), 1.0};
  EXPECT_THROW(lineage::layer_similarity(b.layers[0], b.layers[0], three), lineage::Error);
}

TEST(PairLayers, DominantDiagonalAndUniformScores) {
  const Matrix diag{{0.9, 0.1, 0.2}, {0.1, 0.8, 0.3}, {0.2, 0.1, 0.7}};
  EXPECT_EQ(lineage::pair_layers(diag), (Pairs{{0, 0}, {1, 1}, {2, 2}}));
  EXPECT_EQ(lineage::pair_layers(Matrix(4, 4, 0.3)), (Pairs{{0, 0}, {1, 1}, {2, 2}, {3, 3}}));
}

TEST(PairLayers, PrunedDepthPairsWithSurvivingLayers) {
  const WeightBundle base = lineage::generate_base(small(3, 4));
  ManipulationSpec s = planted(30);
  s.prune = lineage::PruneSpec{1.0, {1, 3}};
  const auto report = lineage::compare(base, lineage::apply_manipulation(base, s));
  EXPECT_EQ(report.layer_map, (Pairs{{1, 0}, {3, 1}}));
  EXPECT_GT(report.similarity, 1.0 - 1e-6);
  ASSERT_EQ(report.per_layer.size(), 2u);
  EXPECT_EQ(report.per_layer[1].layer_a, 3u);
}

TEST(Compare, SelfComparisonIsOne) {
  const WeightBundle b = lineage::generate_base(small(4));
  const auto r = lineage::compare(b, b);
  EXPECT_NEAR(r.similarity, 1.0, 1e-12);
  EXPECT_EQ(r.shared_vocab_size, 64u);
  EXPECT_EQ(r.layer_map, (Pairs{{0, 0}, {1, 1}, {2, 2}}));
}

TEST(Compare, NoiselessManipulationRecoversPlantedTransform) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const WeightBundle base = lineage::generate_base(small(50 + seed));
    const ManipulationSpec spec = planted(500 + 10 * seed, seed % 2 ? 0.5 : -3.0);
    const auto plan = lineage::plan_manipulation(base, spec);
    const auto r = lineage::compare(base, lineage::apply_manipulation(base, spec));
    EXPECT_GT(r.similarity, 1.0 - 1e-6);
    EXPECT_EQ(r.alignment.perm, plan.perm);
    // A negative scale is indistinguishable from flipping every sign.
    std::vector<double> expected = plan.signs;
    for (double& s : expected) s *= spec.scale < 0 ? -1.0 : 1.0;
    EXPECT_EQ(r.alignment.signs, expected);
  }
}

TEST(Compare, HiddenPruneRecoversMatchedColumns) {
  const WeightBundle base = lineage::generate_base(desk(7));
  ManipulationSpec spec = planted(70);
  spec.prune = lineage::PruneSpec{0.75, {}};
  const auto plan = lineage::plan_manipulation(base, spec);
  const auto r = lineage::compare(base, lineage::apply_manipulation(base, spec));
  EXPECT_EQ(r.alignment.perm, plan.perm);
  for (std::size_t k = 0; k < plan.signs.size(); ++k) {
    if (plan.perm[k]) EXPECT_EQ(r.alignment.signs[k], plan.signs[k]);
  }
  EXPECT_GT(r.similarity, 0.5);
}

TEST(Compare, IndependentModelsScoreLow) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = lineage::compare(lineage::generate_base(desk(900 + 2 * seed)),
                                    lineage::generate_base(desk(901 + 2 * seed)));
    EXPECT_LT(r.similarity, 0.05);
  }
}

TEST(Compare, SymmetricOnManipulatedPairs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const WeightBundle a = lineage::generate_base(small(200 + seed));
    const WeightBundle b = lineage::apply_manipulation(a, planted(seed + 7, seed % 2 ? 2.0 : -0.3));
    EXPECT_NEAR(lineage::compare(a, b).similarity, lineage::compare(b, a).similarity, 1e-6);
  }
}

// Unrelated pairs are not exactly symmetric: the recovered signs multiply the
// A-side samples, and sign flips change the unbiased estimator's sum terms.
// The gap stays at the scale of the negative scores themselves.
TEST(Compare, UnrelatedPairsAreNearlySymmetric) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const WeightBundle a = lineage::generate_base(desk(200 + seed));
    const WeightBundle c = lineage::generate_base(desk(300 + seed));
    EXPECT_NEAR(lineage::compare(a, c).similarity, lineage::compare(c, a).similarity, 0.02);
  }
}

TEST(Compare, SimilarityDegradesWithNoise) {
  const WeightBundle base = lineage::generate_base(desk(11));
  double previous = 1.0 + 0.02;
  for (double sigma : {0.0, 0.01, 0.05, 0.1}) {
    ManipulationSpec s = planted(110);
    s.noise_sigma_rel = sigma;
    s.noise_seed = 3;
    const double sim = lineage::compare(base, lineage::apply_manipulation(base, s)).similarity;
    EXPECT_LE(sim, previous + 0.02) << sigma;
    previous = sim;
  }
}

TEST(Compare, PrunedPositivesBeatNegativesByFactorFive) {
  double negative_max = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    negative_max = std::max(negative_max,
                            lineage::compare(lineage::generate_base(desk(700 + 2 * seed)),
                                             lineage::generate_base(desk(701 + 2 * seed)))
                                .similarity);
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const WeightBundle base = lineage::generate_base(desk(800 + seed));
    ManipulationSpec s = planted(80 + seed);
    s.prune = lineage::PruneSpec{0.75, {}};
    const double sim = lineage::compare(base, lineage::apply_manipulation(base, s)).similarity;
    EXPECT_GT(sim, 5.0 * negative_max);
  }
}

TEST(Compare, ThreadCountDoesNotChangeReport) {
  const WeightBundle a = lineage::generate_base(small(12, 4));
  ManipulationSpec s = planted(3);
  s.noise_sigma_rel = 0.05;
  s.prune = lineage::PruneSpec{1.0, {0, 2, 3}};
  const WeightBundle b = lineage::apply_manipulation(a, s);
  const auto serial = lineage::compare(a, b, {1});
  const auto parallel = lineage::compare(a, b, {4});
  EXPECT_EQ(serial.similarity, parallel.similarity);
  EXPECT_EQ(serial.layer_map, parallel.layer_map);
}

TEST(Compare, DegenerateLayersAreFlagged) {
  WeightBundle a = lineage::generate_base(small(13));
  // Identical rows in Q^T make the sample kernel constant off the diagonal.
  a.layers[1].q = Matrix(a.layers[1].q.rows(), a.layers[1].q.cols(), 1.0);
  const auto r = lineage::compare(a, a);
  EXPECT_TRUE(r.per_layer[1].degenerate);
  EXPECT_FALSE(r.per_layer[0].degenerate);
  EXPECT_EQ(r.per_layer[1].s_q, 0.0);
  EXPECT_NEAR(r.similarity, 2.0 / 3.0, 1e-12);
}
