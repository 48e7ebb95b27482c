#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lineage::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitComparison = 2,
  kExitEquivalence = 3,
};

/// Streams and the invoking command line, injected so tests can capture output.
struct CommandContext {
  std::vector<std::string> command_line;
  std::ostream* out;
  std::ostream* err;
};

/// Prints the similarity as a percentage with 2 decimals. With `out_json`,
/// writes the report plus tool version, input digests, and the run manifest.
int cmd_compare(const CommandContext& ctx, const std::filesystem::path& path_a,
                const std::filesystem::path& path_b,
                const std::optional<std::filesystem::path>& out_json);

/// Writes the forged bundle, its vocab sidecar, and "<out>.manifest.json".
int cmd_forge(const CommandContext& ctx, const std::filesystem::path& config_json,
              const std::filesystem::path& out_path);

/// Applies a manipulation spec. With `verify_equivalence` on a noiseless,
/// unpruned spec, compares logits of both bundles on 5 seeded sequences of
/// 12 tokens and returns kExitEquivalence if they diverge by 1e-6 or more.
int cmd_attack(const CommandContext& ctx, const std::filesystem::path& in_path,
               const std::filesystem::path& spec_json, const std::filesystem::path& out_path,
               bool verify_equivalence);

/// Runs the testbed and writes eval_report.json, roc.csv, scores.csv, and
/// manifest.json into out_dir. Only manifest.json varies between reruns.
int cmd_eval(const CommandContext& ctx, const std::filesystem::path& config_json,
             const std::filesystem::path& out_dir);

/// Recomputes the digests recorded in a manifest; 0 when all match.
int cmd_verify(const CommandContext& ctx, const std::filesystem::path& manifest_json);

inline constexpr double kEquivalenceTolerance = 1e-6;

}  // namespace lineage::cli
