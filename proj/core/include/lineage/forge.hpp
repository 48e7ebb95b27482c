#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lineage/linalg.hpp"
#include "lineage/matrix.hpp"
#include "lineage/weights_io.hpp"

namespace lineage {

/// Architecture and seed of a synthetic single-head transformer.
struct ForgeConfig {
  std::size_t vocab_size = 64;
  std::size_t hidden = 16;
  std::size_t layers = 3;
  std::size_t head_dim = 8;  // d_q = d_k = d_v
  std::size_t ffn_dim = 32;
  double rope_base = 10000.0;
  double norm_epsilon = 1e-6;
  std::uint64_t seed = 0;

  /// Throws kInvalidArgument naming the offending field.
  void validate() const;
};

/// Gaussian weights scaled by 1/sqrt(hidden), unit norm gains, vocab t0..t{V-1}.
/// Deterministic per seed.
WeightBundle generate_base(const ForgeConfig& config);

struct PruneSpec {
  double hidden_keep = 1.0;
  /// Base layers to keep, in order; empty keeps every layer.
  std::vector<std::size_t> layers_keep;
};

/// Declarative attack on a base bundle. Each of permutation / signs /
/// rotations is given either explicitly or by seed; neither means identity.
/// sign_mask is indexed by base hidden column; rotation_angles holds one
/// head_dim/2 vector per base layer, applied to both Q and K of that layer.
struct ManipulationSpec {
  double scale = 1.0;
  std::optional<std::uint64_t> perm_seed;
  std::optional<std::vector<std::size_t>> permutation;
  std::optional<std::uint64_t> sign_seed;
  std::optional<std::vector<int>> sign_mask;
  std::optional<std::uint64_t> rotation_seed;
  std::optional<std::vector<std::vector<double>>> rotation_angles;
  std::optional<PruneSpec> prune;
  double noise_sigma_rel = 0.0;
  std::uint64_t noise_seed = 0;

  bool prunes() const noexcept;
};

/// The concrete transform a spec resolves to for a given base.
struct PlantedManipulation {
  double scale = 1.0;
  PartialPermutation perm;            // base hidden column -> manipulated column
  std::vector<double> signs;          // per base hidden column
  std::vector<BlockRotation> rotations;  // per base layer
  std::vector<std::size_t> kept_layers;
};

PlantedManipulation plan_manipulation(const WeightBundle& base, const ManipulationSpec& spec);

/// Builds B from A: embedding c W P D, norm gains |c| (permuted), eps c^2 eps,
/// Q/K U (c^-1 W P D), V W P D, O D^T P^T W, gate/up c^-1 W P D,
/// down c D^T P^T W, lm head c^-1 W P D, then pruning and relative noise.
/// Without pruning or noise the result computes the same logits as A.
WeightBundle apply_manipulation(const WeightBundle& base, const ManipulationSpec& spec);

struct ForwardTrace {
  Matrix logits;                     // sequence x V
  std::vector<Matrix> hidden_states;  // residual stream after each layer
};

/// Reference decoder forward pass: pre-norm single-head causal attention with
/// RoPE, pre-norm SwiGLU FFN, residual connections, lm head. No final norm.
ForwardTrace forward_reference(const WeightBundle& bundle, std::span<const std::size_t> tokens);

/// Row-wise RMSNorm: x / sqrt(mean(x^2) + eps) * weight.
Matrix rms_norm(const Matrix& x, std::span<const double> weight, double epsilon);

/// Rotates row i (position i) pairwise by i * base^(-2j/d) on columns (2j, 2j+1).
Matrix apply_rope(const Matrix& x, double rope_base);

/// Pre-softmax attention scores RoPE(X Wq^T) RoPE(X Wk^T)^T / sqrt(d), unmasked.
Matrix attention_logits(const Matrix& x, const Matrix& wq, const Matrix& wk, double rope_base);

}  // namespace lineage
