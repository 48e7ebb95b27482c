#include "lineage/serialization.hpp"

#include <cstdio>
#include <initializer_list>
#include <sstream>

#include "lineage/error.hpp"

namespace lineage {
namespace {

using nlohmann::json;

void require_object(const json& j, std::string_view what,
                    std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto name : allowed) known = known || key == name;
    if (!known) {
      throw Error(ErrorKind::kInvalidArgument,
                  std::string(what) + ": unknown field \"" + key + "\"");
    }
  }
}

template <typename T>
void read_field(const json& j, std::string_view what, const char* name, T& out) {
  const auto it = j.find(name);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) throw Error(ErrorKind::kInvalidArgument, "");
    }
    out = it->template get<T>();
  } catch (const std::exception&) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + ": field \"" + name +
                                                 "\" has the wrong type (" + it->dump() + ")");
  }
}

template <typename T>
void read_optional(const json& j, std::string_view what, const char* name, std::optional<T>& out) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) return;
  T value{};
  read_field(j, what, name, value);
  out = std::move(value);
}

void read_index_list(const json& j, std::string_view what, const char* name,
                     std::vector<std::size_t>& out) {
  const auto it = j.find(name);
  if (it == j.end()) return;
  bool ok = it->is_array();
  if (ok) {
    for (const auto& v : *it) ok = ok && v.is_number_unsigned();
  }
  if (!ok) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(what) + ": field \"" + name + "\" must be a list of nonnegative integers");
  }
  out = it->get<std::vector<std::size_t>>();
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string(what) + " is not valid JSON: " + e.what());
  }
}

void to_json(json& j, const ForgeConfig& c) {
  j = json{{"vocab_size", c.vocab_size}, {"hidden", c.hidden},     {"layers", c.layers},
           {"head_dim", c.head_dim},     {"ffn_dim", c.ffn_dim},   {"rope_base", c.rope_base},
           {"norm_epsilon", c.norm_epsilon}, {"seed", c.seed}};
}

void from_json(const json& j, ForgeConfig& c) {
  constexpr std::string_view what = "forge config";
  require_object(j, what, {"vocab_size", "hidden", "layers", "head_dim", "ffn_dim", "rope_base",
                           "norm_epsilon", "seed"});
  read_field(j, what, "vocab_size", c.vocab_size);
  read_field(j, what, "hidden", c.hidden);
  read_field(j, what, "layers", c.layers);
  read_field(j, what, "head_dim", c.head_dim);
  read_field(j, what, "ffn_dim", c.ffn_dim);
  read_field(j, what, "rope_base", c.rope_base);
  read_field(j, what, "norm_epsilon", c.norm_epsilon);
  read_field(j, what, "seed", c.seed);
}

void to_json(json& j, const PruneSpec& p) {
  j = json{{"hidden_keep", p.hidden_keep}, {"layers_keep", p.layers_keep}};
}

void from_json(const json& j, PruneSpec& p) {
  constexpr std::string_view what = "prune";
  require_object(j, what, {"hidden_keep", "layers_keep"});
  read_field(j, what, "hidden_keep", p.hidden_keep);
  read_index_list(j, what, "layers_keep", p.layers_keep);
}

void to_json(json& j, const ManipulationSpec& s) {
  j = json::object();
  j["scale"] = s.scale;
  if (s.perm_seed) j["perm_seed"] = *s.perm_seed;
  if (s.permutation) j["permutation"] = *s.permutation;
  if (s.sign_seed) j["sign_seed"] = *s.sign_seed;
  if (s.sign_mask) j["sign_mask"] = *s.sign_mask;
  if (s.rotation_seed) j["rotation_seed"] = *s.rotation_seed;
  if (s.rotation_angles) j["rotation_angles"] = *s.rotation_angles;
  if (s.prune) j["prune"] = *s.prune;
  j["noise_sigma_rel"] = s.noise_sigma_rel;
  j["noise_seed"] = s.noise_seed;
}

void from_json(const json& j, ManipulationSpec& s) {
  constexpr std::string_view what = "manipulation spec";
  require_object(j, what, {"scale", "perm_seed", "permutation", "sign_seed", "sign_mask",
                           "rotation_seed", "rotation_angles", "prune", "noise_sigma_rel",
                           "noise_seed"});
  read_field(j, what, "scale", s.scale);
  read_optional(j, what, "perm_seed", s.perm_seed);
  if (j.contains("permutation") && !j["permutation"].is_null()) {
    std::vector<std::size_t> perm;
    read_index_list(j, what, "permutation", perm);
    s.permutation = std::move(perm);
  }
  read_optional(j, what, "sign_seed", s.sign_seed);
  read_optional(j, what, "sign_mask", s.sign_mask);
  read_optional(j, what, "rotation_seed", s.rotation_seed);
  read_optional(j, what, "rotation_angles", s.rotation_angles);
  if (j.contains("prune") && !j["prune"].is_null()) s.prune = j["prune"].get<PruneSpec>();
  read_field(j, what, "noise_sigma_rel", s.noise_sigma_rel);
  read_field(j, what, "noise_seed", s.noise_seed);
}

void to_json(json& j, const TestbedConfig& c) {
  json model = c.model;
  model.erase("seed");
  j = json{{"model", model},
           {"base_seed", c.base_seed},
           {"categories", c.categories},
           {"noise_levels", c.noise_levels},
           {"positives_per_cell", c.positives_per_cell},
           {"negatives", c.negatives},
           {"negative_seed", c.negative_seed}};
}

void from_json(const json& j, TestbedConfig& c) {
  constexpr std::string_view what = "testbed config";
  require_object(j, what, {"model", "base_seed", "categories", "noise_levels",
                           "positives_per_cell", "negatives", "negative_seed"});
  if (j.contains("model")) c.model = j["model"].get<ForgeConfig>();
  read_field(j, what, "base_seed", c.base_seed);
  read_field(j, what, "categories", c.categories);
  read_field(j, what, "noise_levels", c.noise_levels);
  read_field(j, what, "positives_per_cell", c.positives_per_cell);
  read_field(j, what, "negatives", c.negatives);
  read_field(j, what, "negative_seed", c.negative_seed);
}

void to_json(json& j, const ColumnAlignment& a) {
  json perm = json::array();
  for (const auto& target : a.perm.map()) {
    perm.push_back(target ? json(*target) : json(nullptr));
  }
  j = json{{"perm", perm}, {"signs", a.signs}, {"mean_abs_cosine", a.mean_abs_cosine}};
}

void to_json(json& j, const SimilarityReport& r) {
  json layers = json::array();
  for (const auto& l : r.per_layer) {
    layers.push_back(json{{"layer_a", l.layer_a},
                          {"layer_b", l.layer_b},
                          {"s_q", l.s_q},
                          {"s_k", l.s_k},
                          {"degenerate", l.degenerate}});
  }
  json layer_map = json::array();
  for (const auto& [a, b] : r.layer_map) layer_map.push_back(json::array({a, b}));
  j = json{{"per_layer", layers},
           {"layer_map", layer_map},
           {"similarity", r.similarity},
           {"alignment", r.alignment},
           {"shared_vocab_size", r.shared_vocab_size}};
}

void to_json(json& j, const EvalReport& r) {
  json roc = json::array();
  for (const auto& p : r.roc) roc.push_back(json::array({p.fpr, p.tpr}));
  j = json{{"z_per_positive", r.z_per_positive},
           {"mean_abs_z", r.mean_abs_z},
           {"roc", roc},
           {"auc", r.auc},
           {"pauc", r.pauc},
           {"tpr_at_1pct_fpr", r.tpr_at_1pct_fpr}};
}

void to_json(json& j, const PairFailure& f) {
  j = json{{"pair_id", f.pair_id}, {"category", f.category}, {"message", f.message}};
}

std::string to_string(Label label) {
  return label == Label::kPositive ? "positive" : "negative";
}

std::string roc_to_csv(std::span<const RocPoint> roc) {
  std::ostringstream out;
  out << "fpr,tpr\n";
  for (const auto& p : roc) out << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
  return out.str();
}

std::string scores_to_csv(const ScoreSet& scores) {
  std::ostringstream out;
  out << "pair_id,label,category,similarity\n";
  for (const auto& e : scores) {
    out << e.pair_id << ',' << to_string(e.label) << ',' << e.category << ','
        << format_double(e.similarity) << '\n';
  }
  return out.str();
}

}  // namespace lineage
