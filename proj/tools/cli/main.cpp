#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "lineage/version.hpp"

int main(int argc, char** argv) {
  namespace cli = lineage::cli;

  CLI::App app{"Weight-based lineage fingerprinting for transformer models"};
  app.set_version_flag("--version", std::string(lineage::kVersion));
  app.require_subcommand(1);

  std::string a, b, out, config, in, spec, outdir, manifest;
  bool verify = false;

  auto* compare = app.add_subcommand("compare", "Score how likely B derives from A");
  compare->add_option("A", a, "First bundle")->required();
  compare->add_option("B", b, "Second bundle")->required();
  compare->add_option("--out", out, "Write the similarity report JSON here");

  auto* forge = app.add_subcommand("forge", "Generate a seeded synthetic bundle");
  forge->add_option("CONFIG", config, "Forge config JSON")->required();
  forge->add_option("OUT", out, "Output bundle path")->required();

  auto* attack = app.add_subcommand("attack", "Apply a manipulation spec to a bundle");
  attack->add_option("IN", in, "Input bundle")->required();
  attack->add_option("SPEC", spec, "Manipulation spec JSON")->required();
  attack->add_option("OUT", out, "Output bundle path")->required();
  attack->add_flag("--verify-equivalence", verify,
                   "Check that logits are unchanged (noiseless, unpruned specs)");

  auto* eval = app.add_subcommand("eval", "Run the synthetic evaluation testbed");
  eval->add_option("CONFIG", config, "Testbed config JSON")->required();
  eval->add_option("OUTDIR", outdir, "Directory for report files")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Recheck the digests in a run manifest");
  verify_cmd->add_option("MANIFEST", manifest, "Manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  const cli::CommandContext ctx{std::vector<std::string>(argv, argv + argc), &std::cout,
                                &std::cerr};
  if (*compare) {
    return cli::cmd_compare(ctx, a, b, out.empty() ? std::nullopt : std::optional(out));
  }
  if (*forge) return cli::cmd_forge(ctx, config, out);
  if (*attack) return cli::cmd_attack(ctx, in, spec, out, verify);
  if (*eval) return cli::cmd_eval(ctx, config, outdir);
  return cli::cmd_verify(ctx, manifest);
}
