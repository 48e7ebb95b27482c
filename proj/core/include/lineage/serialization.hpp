#pragma once

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "lineage/evaluation.hpp"
#include "lineage/fingerprint.hpp"
#include "lineage/forge.hpp"

// JSON conversions found by nlohmann::json through ADL, so `json j = spec;`
// and `j.get<ManipulationSpec>()` work. Readers reject unknown keys and throw
// lineage::Error(kInvalidArgument) naming the offending field; omitted keys
// keep their defaults.
namespace lineage {

void to_json(nlohmann::json& j, const ForgeConfig& config);
void from_json(const nlohmann::json& j, ForgeConfig& config);

void to_json(nlohmann::json& j, const PruneSpec& prune);
void from_json(const nlohmann::json& j, PruneSpec& prune);

void to_json(nlohmann::json& j, const ManipulationSpec& spec);
void from_json(const nlohmann::json& j, ManipulationSpec& spec);

/// The thread count is not serialized; it never affects results.
void to_json(nlohmann::json& j, const TestbedConfig& config);
void from_json(const nlohmann::json& j, TestbedConfig& config);

void to_json(nlohmann::json& j, const ColumnAlignment& alignment);
void to_json(nlohmann::json& j, const SimilarityReport& report);
void to_json(nlohmann::json& j, const EvalReport& report);
void to_json(nlohmann::json& j, const PairFailure& failure);

/// Parses JSON text, mapping syntax errors to kInvalidArgument.
nlohmann::json parse_json_text(std::string_view text, std::string_view what);

/// "fpr,tpr" header plus one row per point, %.17g.
std::string roc_to_csv(std::span<const RocPoint> roc);

/// "pair_id,label,category,similarity" header plus one row per entry.
std::string scores_to_csv(const ScoreSet& scores);

std::string to_string(Label label);

}  // namespace lineage
