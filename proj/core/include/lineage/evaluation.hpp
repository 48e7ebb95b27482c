#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lineage/forge.hpp"

namespace lineage {

enum class Label { kPositive, kNegative };

struct ScoreEntry {
  std::string pair_id;
  Label label = Label::kNegative;
  double similarity = 0.0;
  std::string category;
};

using ScoreSet = std::vector<ScoreEntry>;

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

/// |s - mean(neg)| / std(neg) per positive, with the n-1 standard deviation.
std::vector<double> z_scores(std::span<const double> positives, std::span<const double> negatives);

/// Threshold sweep from high to low similarity; equal scores form one step.
/// Starts at (0, 0) and ends at (1, 1).
std::vector<RocPoint> roc_points(const ScoreSet& scores);

/// Trapezoidal area under the curve.
double auc(std::span<const RocPoint> roc);

/// Area over FPR in [0, fpr_max] divided by fpr_max (a perfect detector scores 1).
double pauc(std::span<const RocPoint> roc, double fpr_max = 0.05);

/// TPR at the given FPR, linearly interpolated; on a vertical step the
/// highest TPR reached at that FPR is used.
double tpr_at_fpr(std::span<const RocPoint> roc, double fpr = 0.01);

struct EvalReport {
  std::vector<double> z_per_positive;
  double mean_abs_z = 0.0;
  std::vector<RocPoint> roc;
  double auc = 0.0;
  double pauc = 0.0;
  double tpr_at_1pct_fpr = 0.0;
};

EvalReport evaluate(const ScoreSet& scores);

/// Synthetic positive/negative pair generator settings.
struct TestbedConfig {
  ForgeConfig model;  // architecture; its seed is ignored
  std::uint64_t base_seed = 1000;
  /// Any of: identity, scale, permute_sign, rotate, hidden_prune, layer_prune.
  std::vector<std::string> categories;
  std::vector<double> noise_levels;
  std::size_t positives_per_cell = 1;
  std::size_t negatives = 30;
  std::uint64_t negative_seed = 5000;
  std::size_t threads = 0;
};

/// 5 categories x 4 noise levels = 20 positives, 30 negatives, V=256 n=64 L=3.
TestbedConfig default_testbed_config();

struct PairFailure {
  std::string pair_id;
  std::string category;
  std::string message;
};

struct TestbedRun {
  ScoreSet scores;  // sorted by pair_id
  std::vector<PairFailure> failures;
  EvalReport report;
};

/// Forges every configured pair, runs compare on each, and evaluates the
/// scores. Failing pairs are recorded in `failures`, not dropped silently.
/// Deterministic for a given config regardless of thread count.
TestbedRun run_testbed(const TestbedConfig& config);

}  // namespace lineage
