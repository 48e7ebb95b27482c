#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "lineage/error.hpp"
#include "lineage/evaluation.hpp"
#include "lineage/fingerprint.hpp"
#include "lineage/forge.hpp"
#include "lineage/rng.hpp"
#include "lineage/serialization.hpp"
#include "lineage/version.hpp"
#include "lineage/weights_io.hpp"
#include "manifest.hpp"

namespace lineage::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kEquivalenceSeed = 0x5eed'0f'10'9175ULL;
constexpr std::size_t kEquivalenceSequences = 5;
constexpr std::size_t kEquivalenceLength = 12;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

json read_json(const fs::path& path, std::string_view what) {
  return parse_json_text(read_text(path), std::string(what) + " " + path.string());
}

std::string key(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

RunManifest start_manifest(const CommandContext& ctx) {
  RunManifest m;
  m.tool_version = kVersion;
  m.command_line = ctx.command_line;
  m.started_at = utc_timestamp();
  return m;
}

void add_input(RunManifest& m, const fs::path& p) { m.input_digests[key(p)] = sha256_file(p); }
void add_output(RunManifest& m, const fs::path& p) { m.output_digests[key(p)] = sha256_file(p); }

fs::path manifest_path_for(const fs::path& out) {
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

int report_error(const CommandContext& ctx, const std::exception& e, int code) {
  *ctx.err << "error: " << e.what() << '\n';
  return code;
}

std::string percent(double similarity) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", similarity * 100.0);
  return buf;
}

}  // namespace

int cmd_compare(const CommandContext& ctx, const fs::path& path_a, const fs::path& path_b,
                const std::optional<fs::path>& out_json) {
  RunManifest manifest = start_manifest(ctx);
  WeightBundle a, b;
  try {
    a = load_bundle(path_a);
    b = load_bundle(path_b);
    add_input(manifest, path_a);
    add_input(manifest, vocab_path_for(path_a));
    add_input(manifest, path_b);
    add_input(manifest, vocab_path_for(path_b));
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitUsage);
  }

  SimilarityReport report;
  try {
    report = compare(a, b, CompareOptions{0});
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitComparison);
  }
  *ctx.out << percent(report.similarity) << '\n';

  if (out_json) {
    try {
      json j = report;
      j["tool_version"] = kVersion;
      j["input_digests"] = {{"a", manifest.input_digests.at(key(path_a))},
                            {"b", manifest.input_digests.at(key(path_b))}};
      manifest.finished_at = utc_timestamp();
      j["manifest"] = to_json(manifest);
      write_text(*out_json, pretty(j));
    } catch (const std::exception& e) {
      return report_error(ctx, e, kExitUsage);
    }
  }
  return kExitOk;
}

int cmd_forge(const CommandContext& ctx, const fs::path& config_json, const fs::path& out_path) {
  try {
    RunManifest manifest = start_manifest(ctx);
    const ForgeConfig config = read_json(config_json, "forge config").get<ForgeConfig>();
    config.validate();
    add_input(manifest, config_json);
    manifest.seeds["seed"] = config.seed;
    save_bundle(generate_base(config), out_path);
    add_output(manifest, out_path);
    add_output(manifest, vocab_path_for(out_path));
    manifest.finished_at = utc_timestamp();
    write_text(manifest_path_for(out_path), pretty(to_json(manifest)));
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitUsage);
  }
}

int cmd_attack(const CommandContext& ctx, const fs::path& in_path, const fs::path& spec_json,
               const fs::path& out_path, bool verify_equivalence) {
  RunManifest manifest = start_manifest(ctx);
  WeightBundle base, attacked;
  ManipulationSpec spec;
  try {
    base = load_bundle(in_path);
    spec = read_json(spec_json, "manipulation spec").get<ManipulationSpec>();
    add_input(manifest, in_path);
    add_input(manifest, vocab_path_for(in_path));
    add_input(manifest, spec_json);
    if (spec.perm_seed) manifest.seeds["perm_seed"] = *spec.perm_seed;
    if (spec.sign_seed) manifest.seeds["sign_seed"] = *spec.sign_seed;
    if (spec.rotation_seed) manifest.seeds["rotation_seed"] = *spec.rotation_seed;
    manifest.seeds["noise_seed"] = spec.noise_seed;
    attacked = apply_manipulation(base, spec);
    save_bundle(attacked, out_path);
    add_output(manifest, out_path);
    add_output(manifest, vocab_path_for(out_path));
    manifest.finished_at = utc_timestamp();
    write_text(manifest_path_for(out_path), pretty(to_json(manifest)));
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitUsage);
  }

  if (!verify_equivalence) return kExitOk;
  if (spec.noise_sigma_rel != 0.0 || spec.prunes()) {
    *ctx.err << "note: equivalence check skipped; noisy or pruned specs change the function\n";
    return kExitOk;
  }
  if (!base.has_forward_weights()) {
    *ctx.err << "error: equivalence check needs V/O/FFN/lm_head tensors in " << in_path << '\n';
    return kExitUsage;
  }
  try {
    Rng rng(kEquivalenceSeed);
    double worst = 0.0;
    for (std::size_t s = 0; s < kEquivalenceSequences; ++s) {
      std::vector<std::size_t> tokens(kEquivalenceLength);
      for (auto& t : tokens) t = rng.below(base.vocab.size());
      worst = std::max(worst, max_abs_diff(forward_reference(base, tokens).logits,
                                           forward_reference(attacked, tokens).logits));
    }
    if (!(worst < kEquivalenceTolerance)) {
      *ctx.err << "error: max logit divergence " << worst << " >= " << kEquivalenceTolerance
               << '\n';
      return kExitEquivalence;
    }
    *ctx.err << "equivalence verified: max logit divergence " << worst << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitEquivalence);
  }
}

int cmd_eval(const CommandContext& ctx, const fs::path& config_json, const fs::path& out_dir) {
  RunManifest manifest = start_manifest(ctx);
  TestbedConfig config;
  try {
    config = read_json(config_json, "testbed config").get<TestbedConfig>();
    add_input(manifest, config_json);
    manifest.seeds["base_seed"] = config.base_seed;
    manifest.seeds["negative_seed"] = config.negative_seed;
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitUsage);
  }
  config.threads = 0;

  TestbedRun run;
  try {
    run = run_testbed(config);
  } catch (const Error& e) {
    return report_error(ctx, e, e.kind() == ErrorKind::kInvalidArgument ? kExitUsage
                                                                          : kExitComparison);
  }

  try {
    fs::create_directories(out_dir);
    json report = run.report;
    report["tool_version"] = kVersion;
    report["config"] = config;
    std::size_t positives = 0;
    for (const auto& e : run.scores) positives += e.label == Label::kPositive ? 1 : 0;
    report["num_positive"] = positives;
    report["num_negative"] = run.scores.size() - positives;
    report["min_abs_z"] = run.report.z_per_positive.empty()
                              ? 0.0
                              : *std::min_element(run.report.z_per_positive.begin(),
                                                  run.report.z_per_positive.end());
    report["errors"] = run.failures;

    const fs::path report_path = out_dir / "eval_report.json";
    const fs::path roc_path = out_dir / "roc.csv";
    const fs::path scores_path = out_dir / "scores.csv";
    write_text(report_path, pretty(report));
    write_text(roc_path, roc_to_csv(run.report.roc));
    write_text(scores_path, scores_to_csv(run.scores));
    add_output(manifest, report_path);
    add_output(manifest, roc_path);
    add_output(manifest, scores_path);
    manifest.finished_at = utc_timestamp();
    write_text(out_dir / "manifest.json", pretty(to_json(manifest)));

    *ctx.out << "auc=" << run.report.auc << " pauc=" << run.report.pauc
             << " tpr@1%fpr=" << run.report.tpr_at_1pct_fpr << " pairs=" << run.scores.size()
             << " errors=" << run.failures.size() << '\n';
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitUsage);
  }
  return kExitOk;
}

int cmd_verify(const CommandContext& ctx, const fs::path& manifest_json) {
  try {
    const RunManifest manifest = manifest_from_json(read_json(manifest_json, "manifest"));
    const auto problems = verify_manifest(manifest);
    for (const auto& p : problems) *ctx.err << "mismatch: " << p << '\n';
    if (!problems.empty()) return kExitUsage;
    *ctx.out << "ok\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return report_error(ctx, e, kExitUsage);
  }
}

}  // namespace lineage::cli
