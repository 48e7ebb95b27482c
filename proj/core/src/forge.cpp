#include "lineage/forge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "lineage/error.hpp"
#include "lineage/rng.hpp"

namespace lineage {
namespace {

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::kInvalidArgument, what);
}

Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

Matrix scaled(Matrix m, double factor) {
  for (double& x : m.data()) x *= factor;
  return m;
}

std::vector<double> permute_gains(const std::vector<double>& gains, const PartialPermutation& perm,
                                  double factor) {
  std::vector<double> out(perm.target_size(), 0.0);
  for (std::size_t k = 0; k < perm.source_size(); ++k) {
    if (const auto t = perm[k]) out[*t] = factor * gains[k];
  }
  return out;
}

void add_relative_noise(std::span<double> values, double sigma_rel, Rng& rng) {
  if (values.empty()) return;
  double ss = 0.0;
  for (double x : values) ss += x * x;
  const double sigma = sigma_rel * std::sqrt(ss / static_cast<double>(values.size()));
  for (double& x : values) x += sigma * rng.normal();
}

}  // namespace

void ForgeConfig::validate() const {
  if (vocab_size < 1) invalid("vocab_size must be >= 1");
  if (hidden < 1) invalid("hidden must be >= 1");
  if (layers < 1) invalid("layers must be >= 1");
  if (head_dim < 2 || head_dim % 2 != 0) invalid("head_dim must be a positive even number");
  if (ffn_dim < 1) invalid("ffn_dim must be >= 1");
  if (!(rope_base > 0.0) || !std::isfinite(rope_base)) invalid("rope_base must be positive");
  if (!(norm_epsilon > 0.0) || !std::isfinite(norm_epsilon)) {
    invalid("norm_epsilon must be positive");
  }
}

WeightBundle generate_base(const ForgeConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  const std::size_t n = config.hidden;
  const std::size_t d = config.head_dim;
  const std::size_t f = config.ffn_dim;

  WeightBundle b;
  b.vocab = Vocab::sequential(config.vocab_size);
  b.rope_base = config.rope_base;
  b.norm_epsilon = config.norm_epsilon;
  b.embedding = gaussian(rng, config.vocab_size, n, scale);
  b.layers.reserve(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerWeights lw;
    lw.q = gaussian(rng, d, n, scale);
    lw.k = gaussian(rng, d, n, scale);
    lw.v = gaussian(rng, d, n, scale);
    lw.o = gaussian(rng, n, d, scale);
    lw.attn_norm.assign(n, 1.0);
    lw.ffn_norm.assign(n, 1.0);
    lw.ffn_up = gaussian(rng, f, n, scale);
    lw.ffn_gate = gaussian(rng, f, n, scale);
    lw.ffn_down = gaussian(rng, n, f, scale);
    b.layers.push_back(std::move(lw));
  }
  b.lm_head = gaussian(rng, config.vocab_size, n, scale);
  return b;
}

bool ManipulationSpec::prunes() const noexcept {
  return prune && (prune->hidden_keep < 1.0 || !prune->layers_keep.empty());
}

PlantedManipulation plan_manipulation(const WeightBundle& base, const ManipulationSpec& spec) {
  const std::size_t n = base.hidden_dim();
  const std::size_t num_layers = base.layers.size();
  PlantedManipulation plan;

  if (!(spec.scale != 0.0) || !std::isfinite(spec.scale)) invalid("scale must be finite and nonzero");
  if (!(spec.noise_sigma_rel >= 0.0) || !std::isfinite(spec.noise_sigma_rel)) {
    invalid("noise_sigma_rel must be a finite nonnegative number");
  }
  plan.scale = spec.scale;

  std::vector<std::size_t> full(n);
  if (spec.permutation && spec.perm_seed) invalid("give either permutation or perm_seed, not both");
  if (spec.permutation) {
    full = *spec.permutation;
    std::vector<std::size_t> sorted = full;
    std::ranges::sort(sorted);
    bool ok = sorted.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) ok = sorted[i] == i;
    if (!ok) invalid("permutation must be a permutation of 0.." + std::to_string(n - 1));
  } else if (spec.perm_seed) {
    Rng rng(*spec.perm_seed);
    full = rng.permutation(n);
  } else {
    for (std::size_t i = 0; i < n; ++i) full[i] = i;
  }

  // Hidden pruning keeps a random subset; surviving columns keep the relative
  // order of their permuted positions.
  std::vector<std::size_t> kept(n);
  for (std::size_t i = 0; i < n; ++i) kept[i] = i;
  if (spec.prune) {
    const double keep = spec.prune->hidden_keep;
    if (!(keep > 0.0 && keep <= 1.0)) invalid("prune.hidden_keep must be in (0, 1]");
    const auto count = static_cast<std::size_t>(std::llround(keep * static_cast<double>(n)));
    if (count < 4) {
      invalid("prune.hidden_keep leaves " + std::to_string(count) +
              " hidden dims; at least 4 are needed for UCKA");
    }
    if (count < n) {
      Rng rng(mix_seed(spec.perm_seed.value_or(0), 1));
      kept = rng.subset(n, count);
    }
  }
  std::vector<std::size_t> kept_targets;
  kept_targets.reserve(kept.size());
  for (std::size_t k : kept) kept_targets.push_back(full[k]);
  std::ranges::sort(kept_targets);
  std::vector<std::optional<std::size_t>> map(n);
  for (std::size_t k : kept) {
    const auto it = std::ranges::lower_bound(kept_targets, full[k]);
    map[k] = static_cast<std::size_t>(it - kept_targets.begin());
  }
  plan.perm = PartialPermutation(kept.size(), std::move(map));

  plan.signs.assign(n, 1.0);
  if (spec.sign_mask && spec.sign_seed) invalid("give either sign_mask or sign_seed, not both");
  if (spec.sign_mask) {
    if (spec.sign_mask->size() != n) {
      invalid("sign_mask must have " + std::to_string(n) + " entries");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const int s = (*spec.sign_mask)[k];
      if (s != 1 && s != -1) invalid("sign_mask entries must be +1 or -1");
      plan.signs[k] = s;
    }
  } else if (spec.sign_seed) {
    Rng rng(*spec.sign_seed);
    for (double& s : plan.signs) s = (rng.next_u64() & 1) ? -1.0 : 1.0;
  }

  plan.rotations.resize(num_layers);
  if (spec.rotation_angles && spec.rotation_seed) {
    invalid("give either rotation_angles or rotation_seed, not both");
  }
  if (spec.rotation_angles && spec.rotation_angles->size() != num_layers) {
    invalid("rotation_angles needs one vector per base layer (" + std::to_string(num_layers) + ")");
  }
  std::optional<Rng> rotation_rng;
  if (spec.rotation_seed) rotation_rng.emplace(*spec.rotation_seed);
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t d = base.layers[l].q.rows();
    if (spec.rotation_angles) {
      if (base.layers[l].k.rows() != d) invalid("rotations need d_q == d_k");
      const auto& angles = (*spec.rotation_angles)[l];
      if (angles.size() != d / 2) {
        invalid("rotation_angles[" + std::to_string(l) + "] needs " + std::to_string(d / 2) +
                " angles");
      }
      plan.rotations[l] = BlockRotation(angles);
    } else if (rotation_rng) {
      if (base.layers[l].k.rows() != d) invalid("rotations need d_q == d_k");
      std::vector<double> angles(d / 2);
      for (double& a : angles) a = rotation_rng->uniform(-std::numbers::pi, std::numbers::pi);
      plan.rotations[l] = BlockRotation(std::move(angles));
    } else {
      plan.rotations[l] = BlockRotation::identity(d);
    }
  }

  if (spec.prune && !spec.prune->layers_keep.empty()) {
    plan.kept_layers = spec.prune->layers_keep;
    std::vector<char> seen(num_layers, 0);
    for (std::size_t l : plan.kept_layers) {
      if (l >= num_layers) invalid("prune.layers_keep index " + std::to_string(l) + " out of range");
      if (seen[l]) invalid("prune.layers_keep repeats layer " + std::to_string(l));
      seen[l] = 1;
    }
  } else {
    plan.kept_layers.resize(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) plan.kept_layers[l] = l;
  }
  return plan;
}

WeightBundle apply_manipulation(const WeightBundle& base, const ManipulationSpec& spec) {
  validate(base);
  const PlantedManipulation plan = plan_manipulation(base, spec);
  const double c = plan.scale;
  const double inv_c = 1.0 / c;
  const auto& perm = plan.perm;
  const auto& signs = plan.signs;

  WeightBundle out;
  out.vocab = base.vocab;
  out.rope_base = base.rope_base;
  out.norm_epsilon = c * c * base.norm_epsilon;
  out.embedding = apply_perm_sign_columns(scaled(base.embedding, c), perm, signs);
  if (base.lm_head) out.lm_head = apply_perm_sign_columns(scaled(*base.lm_head, inv_c), perm, signs);

  for (std::size_t l : plan.kept_layers) {
    const LayerWeights& a = base.layers[l];
    LayerWeights b;
    b.q = apply_block_rotation(apply_perm_sign_columns(scaled(a.q, inv_c), perm, signs),
                               plan.rotations[l]);
    b.k = apply_block_rotation(apply_perm_sign_columns(scaled(a.k, inv_c), perm, signs),
                               plan.rotations[l]);
    // Signs cancel on the diagonal gain; |c| keeps the normalized output at c X P D.
    b.attn_norm = permute_gains(a.attn_norm, perm, std::abs(c));
    b.ffn_norm = permute_gains(a.ffn_norm, perm, std::abs(c));
    if (a.v) b.v = apply_perm_sign_columns(*a.v, perm, signs);
    if (a.o) b.o = apply_perm_sign_rows(*a.o, perm, signs);
    if (a.ffn_up) b.ffn_up = apply_perm_sign_columns(scaled(*a.ffn_up, inv_c), perm, signs);
    if (a.ffn_gate) b.ffn_gate = apply_perm_sign_columns(scaled(*a.ffn_gate, inv_c), perm, signs);
    if (a.ffn_down) b.ffn_down = apply_perm_sign_rows(scaled(*a.ffn_down, c), perm, signs);
    out.layers.push_back(std::move(b));
  }

  if (spec.noise_sigma_rel > 0.0) {
    // Tensors are visited in container (name) order so the noise stream is
    // independent of struct layout.
    Container container = to_container(out);
    Rng rng(spec.noise_seed);
    for (auto& [name, tensor] : container.tensors) {
      add_relative_noise(tensor.values, spec.noise_sigma_rel, rng);
    }
    out = from_container(container, out.vocab);
  }
  validate(out);
  return out;
}

Matrix rms_norm(const Matrix& x, std::span<const double> weight, double epsilon) {
  if (weight.size() != x.cols()) {
    throw Error(ErrorKind::kShapeMismatch, "norm weight length differs from hidden size");
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    double ss = 0.0;
    for (double v : row) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.cols()) + epsilon);
    auto o = out.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) o[j] = row[j] * inv * weight[j];
  }
  return out;
}

Matrix apply_rope(const Matrix& x, double rope_base) {
  const std::size_t d = x.cols();
  if (d % 2 != 0) throw Error(ErrorKind::kShapeMismatch, "RoPE needs an even feature count");
  Matrix out(x.rows(), d);
  for (std::size_t pos = 0; pos < x.rows(); ++pos) {
    const auto in = x.row(pos);
    auto o = out.row(pos);
    for (std::size_t j = 0; j < d / 2; ++j) {
      const double freq = std::pow(rope_base, -2.0 * static_cast<double>(j) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * freq;
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      o[2 * j] = in[2 * j] * c - in[2 * j + 1] * s;
      o[2 * j + 1] = in[2 * j] * s + in[2 * j + 1] * c;
    }
  }
  return out;
}

Matrix attention_logits(const Matrix& x, const Matrix& wq, const Matrix& wk, double rope_base) {
  if (wq.rows() != wk.rows()) throw Error(ErrorKind::kShapeMismatch, "d_q must equal d_k");
  const Matrix q = apply_rope(matmul_transposed(x, wq), rope_base);
  const Matrix k = apply_rope(matmul_transposed(x, wk), rope_base);
  Matrix scores = matmul_transposed(q, k);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(wq.rows()));
  for (double& s : scores.data()) s *= inv_sqrt_d;
  return scores;
}

ForwardTrace forward_reference(const WeightBundle& bundle, std::span<const std::size_t> tokens) {
  if (tokens.empty()) invalid("forward pass needs at least one token");
  if (!bundle.has_forward_weights()) {
    throw Error(ErrorKind::kMissingTensor, "forward pass needs v/o/ffn tensors and lm_head");
  }
  const std::size_t vocab = bundle.embedding.rows();
  for (std::size_t t : tokens) {
    if (t >= vocab) invalid("token index " + std::to_string(t) + " out of range");
  }

  const std::vector<std::size_t> ids(tokens.begin(), tokens.end());
  Matrix x = bundle.embedding.select_rows(ids);
  const std::size_t seq = x.rows();
  ForwardTrace trace;

  for (const LayerWeights& layer : bundle.layers) {
    const Matrix normed = rms_norm(x, layer.attn_norm, bundle.norm_epsilon);
    Matrix scores = attention_logits(normed, layer.q, layer.k, bundle.rope_base);
    for (std::size_t i = 0; i < seq; ++i) {
      auto row = scores.row(i);
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= i; ++j) peak = std::max(peak, row[j]);
      double total = 0.0;
      for (std::size_t j = 0; j < seq; ++j) {
        row[j] = j <= i ? std::exp(row[j] - peak) : 0.0;
        total += row[j];
      }
      for (double& w : row) w /= total;
    }
    const Matrix values = matmul_transposed(normed, *layer.v);
    const Matrix attended = matmul(scores, values);
    const Matrix attn_out = matmul_transposed(attended, *layer.o);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += attn_out.data()[i];

    const Matrix normed_ffn = rms_norm(x, layer.ffn_norm, bundle.norm_epsilon);
    Matrix gate = matmul_transposed(normed_ffn, *layer.ffn_gate);
    const Matrix up = matmul_transposed(normed_ffn, *layer.ffn_up);
    for (std::size_t i = 0; i < gate.size(); ++i) {
      const double g = gate.data()[i];
      gate.data()[i] = g / (1.0 + std::exp(-g)) * up.data()[i];
    }
    const Matrix ffn_out = matmul_transposed(gate, *layer.ffn_down);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += ffn_out.data()[i];
    trace.hidden_states.push_back(x);
  }
  trace.logits = matmul_transposed(x, *bundle.lm_head);
  return trace;
}

}  // namespace lineage
