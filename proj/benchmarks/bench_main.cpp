#include <benchmark/benchmark.h>

#include <numbers>

#include "lineage/assignment.hpp"
#include "lineage/fingerprint.hpp"
#include "lineage/forge.hpp"
#include "lineage/kernel_alignment.hpp"
#include "lineage/linalg.hpp"
#include "lineage/rng.hpp"

namespace {

lineage::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  lineage::Rng rng(seed);
  lineage::Matrix m(rows, cols);
  for (auto& x : m.data()) x = rng.normal();
  return m;
}

void BM_SolveMaxAssignment(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  lineage::Matrix w = random_matrix(n, n, 1);
  for (auto& x : w.data()) x = std::abs(x);
  for (auto _ : state) benchmark::DoNotOptimize(lineage::solve_max_assignment(w));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveMaxAssignment)->RangeMultiplier(2)->Range(32, 512)->Complexity();

void BM_SolveMaxAssignmentRectangular(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const lineage::Matrix w = random_matrix(3 * n / 4, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(lineage::solve_max_assignment(w));
}
BENCHMARK(BM_SolveMaxAssignmentRectangular)->Arg(128)->Arg(512);

void BM_Ucka(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const lineage::Matrix a = random_matrix(m, 64, 3);
  const lineage::Matrix b = random_matrix(m, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(lineage::ucka(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Ucka)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_CosineMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const lineage::Matrix a = random_matrix(1024, n, 5);
  const lineage::Matrix b = random_matrix(1024, n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(lineage::cosine_matrix(a, b));
}
BENCHMARK(BM_CosineMatrix)->Arg(64)->Arg(256);

void BM_Compare(benchmark::State& state) {
  lineage::ForgeConfig config;
  config.vocab_size = 256;
  config.hidden = static_cast<std::size_t>(state.range(0));
  config.layers = 3;
  config.head_dim = 16;
  config.ffn_dim = 2 * config.hidden;
  config.seed = 7;
  const auto base = lineage::generate_base(config);
  lineage::ManipulationSpec spec;
  spec.scale = 0.5;
  spec.perm_seed = 1;
  spec.sign_seed = 2;
  spec.rotation_seed = 3;
  const auto attacked = lineage::apply_manipulation(base, spec);
  for (auto _ : state) benchmark::DoNotOptimize(lineage::compare(base, attacked));
}
BENCHMARK(BM_Compare)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ForwardReference(benchmark::State& state) {
  lineage::ForgeConfig config;
  config.seed = 9;
  const auto bundle = lineage::generate_base(config);
  std::vector<std::size_t> tokens(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = (7 * i) % config.vocab_size;
  for (auto _ : state) benchmark::DoNotOptimize(lineage::forward_reference(bundle, tokens));
}
BENCHMARK(BM_ForwardReference)->Arg(12)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
