#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lineage/matrix.hpp"

namespace lineage {

/// Token string -> embedding row, a bijection onto 0..V-1. Iteration order is
/// ascending token string.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::map<std::string, std::size_t> entries);

  /// "t0".."t{n-1}" mapped to 0..n-1.
  static Vocab sequential(std::size_t n);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, std::size_t>& entries() const noexcept { return entries_; }
  std::optional<std::size_t> find(const std::string& token) const;

  bool operator==(const Vocab&) const = default;

 private:
  std::map<std::string, std::size_t> entries_;
};

struct LayerWeights {
  Matrix q;  // d_q x n
  Matrix k;  // d_k x n
  std::optional<Matrix> v;  // d_v x n
  std::optional<Matrix> o;  // n x d_v
  std::vector<double> attn_norm;  // n
  std::vector<double> ffn_norm;   // n
  std::optional<Matrix> ffn_up;    // d_ff x n
  std::optional<Matrix> ffn_gate;  // d_ff x n
  std::optional<Matrix> ffn_down;  // n x d_ff

  bool has_forward_weights() const noexcept {
    return v && o && ffn_up && ffn_gate && ffn_down;
  }
  bool operator==(const LayerWeights&) const = default;
};

struct WeightBundle {
  Vocab vocab;
  Matrix embedding;  // V x n
  std::vector<LayerWeights> layers;
  std::optional<Matrix> lm_head;  // V x n
  double rope_base = 10000.0;
  double norm_epsilon = 1e-6;

  std::size_t hidden_dim() const noexcept { return embedding.cols(); }
  bool has_forward_weights() const noexcept;
  bool operator==(const WeightBundle&) const = default;
};

/// Throws lineage::Error (kShapeMismatch / kInvariantViolation) when a bundle
/// breaks its invariants: Q/K width n with even height, norm lengths, optional
/// tensors all-or-none per layer and mutually consistent, finite values,
/// vocab size equal to embedding rows, positive rope base and epsilon.
void validate(const WeightBundle& bundle);

enum class StoredDtype { kF32, kF64 };

/// One tensor of a container file, always materialized as doubles.
struct Tensor {
  StoredDtype dtype = StoredDtype::kF64;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  bool operator==(const Tensor&) const = default;
};

/// Raw container contents: name -> tensor plus string metadata.
struct Container {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::string> metadata;
};

// Container layout: u64 LE header length N, N bytes of JSON header
// {name: {dtype, shape, data_offsets: [begin, end)}, "__metadata__": {...}},
// then the little-endian row-major data region. Tensors are laid out in
// ascending name order.
Container read_container(const std::filesystem::path& path);
void write_container(const Container& container, const std::filesystem::path& path);

Container to_container(const WeightBundle& bundle, StoredDtype dtype = StoredDtype::kF64);
WeightBundle from_container(const Container& container, Vocab vocab);

/// "<dir>/<stem>.vocab.json" for a bundle at "<dir>/<stem>.<ext>".
std::filesystem::path vocab_path_for(const std::filesystem::path& bundle_path);

Vocab parse_vocab_json(std::string_view text);
std::string vocab_to_json(const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);
void save_vocab(const Vocab& vocab, const std::filesystem::path& path);

/// Reads the container and its vocab sidecar, validates, returns the bundle.
WeightBundle load_bundle(const std::filesystem::path& path);

/// Validates, then writes the container and the vocab sidecar.
void save_bundle(const WeightBundle& bundle, const std::filesystem::path& path,
                 StoredDtype dtype = StoredDtype::kF64);

}  // namespace lineage
