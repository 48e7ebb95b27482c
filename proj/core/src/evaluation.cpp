#include "lineage/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "lineage/error.hpp"
#include "lineage/fingerprint.hpp"
#include "lineage/parallel.hpp"
#include "lineage/rng.hpp"

namespace lineage {
namespace {

double segment_area(const RocPoint& a, const RocPoint& b) {
  return (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
}

double interpolate_tpr(const RocPoint& a, const RocPoint& b, double fpr) {
  if (b.fpr == a.fpr) return b.tpr;
  return a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr);
}

struct PairJob {
  std::string pair_id;
  std::string category;
  Label label = Label::kPositive;
  std::uint64_t seed_a = 0;
  std::uint64_t seed_b = 0;  // negatives only
  std::optional<ManipulationSpec> spec;
};

ManipulationSpec spec_for(const std::string& category, std::size_t layers, double noise,
                          std::uint64_t seed) {
  ManipulationSpec spec;
  spec.noise_sigma_rel = noise;
  spec.noise_seed = mix_seed(seed, 10);
  Rng rng(mix_seed(seed, 11));
  if (category == "identity") {
    return spec;
  }
  if (category == "scale") {
    const double magnitude = std::exp(rng.uniform(std::log(0.2), std::log(5.0)));
    spec.scale = (rng.next_u64() & 1) ? -magnitude : magnitude;
  } else if (category == "permute_sign") {
    spec.perm_seed = mix_seed(seed, 12);
    spec.sign_seed = mix_seed(seed, 13);
  } else if (category == "rotate") {
    spec.rotation_seed = mix_seed(seed, 14);
  } else if (category == "hidden_prune") {
    spec.perm_seed = mix_seed(seed, 12);
    spec.sign_seed = mix_seed(seed, 13);
    spec.prune = PruneSpec{0.75, {}};
  } else if (category == "layer_prune") {
    if (layers < 2) throw Error(ErrorKind::kInvalidArgument, "layer_prune needs >= 2 layers");
    spec.perm_seed = mix_seed(seed, 12);
    spec.sign_seed = mix_seed(seed, 13);
    const std::size_t dropped = rng.below(layers);
    PruneSpec prune;
    for (std::size_t l = 0; l < layers; ++l) {
      if (l != dropped) prune.layers_keep.push_back(l);
    }
    spec.prune = prune;
  } else {
    throw Error(ErrorKind::kInvalidArgument, "unknown testbed category \"" + category + "\"");
  }
  return spec;
}

std::string pad3(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", i);
  return buf;
}

std::string noise_tag(double noise) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "n%.3f", noise);
  return buf;
}

}  // namespace

std::vector<double> z_scores(std::span<const double> positives, std::span<const double> negatives) {
  if (negatives.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "z-scores need at least 2 negatives");
  }
  const double n = static_cast<double>(negatives.size());
  const double mean = std::accumulate(negatives.begin(), negatives.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : negatives) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) {
    throw Error(ErrorKind::kDegenerate, "negative scores have zero variance");
  }
  std::vector<double> z;
  z.reserve(positives.size());
  for (double s : positives) z.push_back(std::abs(s - mean) / sd);
  return z;
}

std::vector<RocPoint> roc_points(const ScoreSet& scores) {
  std::vector<std::pair<double, bool>> items;
  items.reserve(scores.size());
  std::size_t pos = 0;
  for (const auto& e : scores) {
    if (!std::isfinite(e.similarity)) {
      throw Error(ErrorKind::kInvalidArgument, "score for " + e.pair_id + " is not finite");
    }
    const bool positive = e.label == Label::kPositive;
    pos += positive ? 1 : 0;
    items.emplace_back(e.similarity, positive);
  }
  const std::size_t neg = items.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::kInvalidArgument, "ROC needs both positive and negative scores");
  }
  std::ranges::sort(items, [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < items.size();) {
    const double threshold = items[i].first;
    for (; i < items.size() && items[i].first == threshold; ++i) {
      (items[i].second ? tp : fp) += 1;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return roc;
}

double auc(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) area += segment_area(roc[i - 1], roc[i]);
  return area;
}

double pauc(std::span<const RocPoint> roc, double fpr_max) {
  if (!(fpr_max > 0.0 && fpr_max <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "pauc fpr_max must be in (0, 1]");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const RocPoint& a = roc[i - 1];
    const RocPoint& b = roc[i];
    if (a.fpr >= fpr_max) break;
    if (b.fpr <= fpr_max) {
      area += segment_area(a, b);
    } else {
      area += segment_area(a, {fpr_max, interpolate_tpr(a, b, fpr_max)});
    }
  }
  return area / fpr_max;
}

double tpr_at_fpr(std::span<const RocPoint> roc, double fpr) {
  if (roc.empty()) return 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < roc.size(); ++i) {
    if (roc[i].fpr <= fpr) last = i;
  }
  if (roc[last].fpr == fpr || last + 1 == roc.size()) return roc[last].tpr;
  return interpolate_tpr(roc[last], roc[last + 1], fpr);
}

EvalReport evaluate(const ScoreSet& scores) {
  std::vector<double> positives;
  std::vector<double> negatives;
  for (const auto& e : scores) {
    (e.label == Label::kPositive ? positives : negatives).push_back(e.similarity);
  }
  EvalReport r;
  r.roc = roc_points(scores);
  r.z_per_positive = z_scores(positives, negatives);
  r.mean_abs_z = std::accumulate(r.z_per_positive.begin(), r.z_per_positive.end(), 0.0) /
                 static_cast<double>(r.z_per_positive.size());
  r.auc = auc(r.roc);
  r.pauc = pauc(r.roc, 0.05);
  r.tpr_at_1pct_fpr = tpr_at_fpr(r.roc, 0.01);
  return r;
}

TestbedConfig default_testbed_config() {
  TestbedConfig c;
  c.model.vocab_size = 256;
  c.model.hidden = 64;
  c.model.layers = 3;
  c.model.head_dim = 16;
  c.model.ffn_dim = 128;
  c.categories = {"scale", "permute_sign", "rotate", "hidden_prune", "layer_prune"};
  c.noise_levels = {0.0, 0.02, 0.05, 0.1};
  c.positives_per_cell = 1;
  c.negatives = 30;
  return c;
}

TestbedRun run_testbed(const TestbedConfig& config) {
  config.model.validate();
  if (config.categories.empty() || config.noise_levels.empty() || config.positives_per_cell == 0) {
    throw Error(ErrorKind::kInvalidArgument, "testbed has no positive pairs configured");
  }
  if (config.negatives < 2) {
    throw Error(ErrorKind::kInvalidArgument, "testbed needs at least 2 negative pairs");
  }
  for (double noise : config.noise_levels) {
    if (!(noise >= 0.0) || !std::isfinite(noise)) {
      throw Error(ErrorKind::kInvalidArgument, "noise levels must be finite and nonnegative");
    }
  }

  std::vector<PairJob> jobs;
  std::size_t index = 0;
  for (const auto& category : config.categories) {
    for (double noise : config.noise_levels) {
      for (std::size_t rep = 0; rep < config.positives_per_cell; ++rep, ++index) {
        PairJob job;
        job.pair_id = "pos-" + pad3(index) + "-" + category + "-" + noise_tag(noise);
        job.category = category;
        job.label = Label::kPositive;
        job.seed_a = config.base_seed + index;
        job.spec = spec_for(category, config.model.layers, noise, mix_seed(config.base_seed, index));
        jobs.push_back(std::move(job));
      }
    }
  }
  for (std::size_t i = 0; i < config.negatives; ++i) {
    PairJob job;
    job.pair_id = "neg-" + pad3(i);
    job.category = "independent";
    job.label = Label::kNegative;
    job.seed_a = config.negative_seed + 2 * i;
    job.seed_b = config.negative_seed + 2 * i + 1;
    jobs.push_back(std::move(job));
  }

  std::vector<std::optional<double>> results(jobs.size());
  std::vector<std::string> messages(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
    const PairJob& job = jobs[i];
    try {
      ForgeConfig model = config.model;
      model.seed = job.seed_a;
      const WeightBundle a = generate_base(model);
      WeightBundle b;
      if (job.spec) {
        b = apply_manipulation(a, *job.spec);
      } else {
        model.seed = job.seed_b;
        b = generate_base(model);
      }
      results[i] = compare(a, b).similarity;
    } catch (const std::exception& e) {
      messages[i] = e.what();
    }
  });

  TestbedRun run;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (results[i]) {
      run.scores.push_back({jobs[i].pair_id, jobs[i].label, *results[i], jobs[i].category});
    } else {
      run.failures.push_back({jobs[i].pair_id, jobs[i].category, messages[i]});
    }
  }
  std::ranges::sort(run.scores, {}, &ScoreEntry::pair_id);
  std::ranges::sort(run.failures, {}, &PairFailure::pair_id);
  run.report = evaluate(run.scores);
  return run;
}

}  // namespace lineage
