#include "manifest.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "lineage/error.hpp"

namespace lineage::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(got));
  }
  if (in.bad()) throw Error(ErrorKind::kIo, "read failed for " + path.string());

  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &length);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json to_json(const RunManifest& m) {
  return nlohmann::json{{"tool_version", m.tool_version},
                        {"command_line", m.command_line},
                        {"input_digests", m.input_digests},
                        {"output_digests", m.output_digests},
                        {"timestamps", {{"started", m.started_at}, {"finished", m.finished_at}}},
                        {"seeds", m.seeds}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command_line = j.at("command_line").get<std::vector<std::string>>();
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    m.output_digests = j.value("output_digests", std::map<std::string, std::string>{});
    m.started_at = j.at("timestamps").at("started").get<std::string>();
    m.finished_at = j.at("timestamps").at("finished").get<std::string>();
    m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, std::string("malformed manifest: ") + e.what());
  }
}

std::vector<std::string> verify_manifest(const RunManifest& m) {
  std::vector<std::string> problems;
  auto check = [&](const std::map<std::string, std::string>& digests) {
    for (const auto& [path, digest] : digests) {
      try {
        const std::string actual = sha256_file(path);
        if (actual != digest) problems.push_back(path + ": digest " + actual + " != " + digest);
      } catch (const Error& e) {
        problems.push_back(path + ": " + e.what());
      }
    }
  };
  check(m.input_digests);
  check(m.output_digests);
  return problems;
}

}  // namespace lineage::cli
