#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lineage::cli {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Audit record written next to every command's outputs.
struct RunManifest {
  std::string tool_version;
  std::vector<std::string> command_line;
  std::map<std::string, std::string> input_digests;   // path -> sha256
  std::map<std::string, std::string> output_digests;  // path -> sha256
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;  // ISO 8601 UTC
  std::map<std::string, std::uint64_t> seeds;
};

std::string utc_timestamp();

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Recomputes every recorded digest; returns one message per mismatch or
/// unreadable file (empty when the manifest replays cleanly).
std::vector<std::string> verify_manifest(const RunManifest& manifest);

}  // namespace lineage::cli
