#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "prefforge/gcpo.hpp"
#include "prefforge/toylab.hpp"
#include "prefforge/trace_protocol.hpp"
#include "prefforge/util.hpp"

namespace {

using namespace prefforge;

std::vector<double> random_scores(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 10.0);
  std::vector<double> out(n);
  for (double& s : out) s = dist(rng);
  return out;
}

// Sort + binary-search ratio rewards; O(N log N) per pair.
void BM_WinLossRatios(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = random_scores(n, 1);
  const auto l = random_scores(n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(win_loss_ratios(w, l, 0.0));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WinLossRatios)->RangeMultiplier(8)->Range(8, 4096)->Complexity();

// The naive O(N^2) definition kept as the test oracle.
void BM_BruteForceRatios(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = random_scores(n, 1);
  const auto l = random_scores(n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(brute_force_ratios(w, l, 0.0));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BruteForceRatios)->RangeMultiplier(8)->Range(8, 512)->Complexity();

SyntheticWorld bench_world() {
  WorldParams params;
  params.samples = 64;
  params.candidates_per_context = 4;
  params.seed = 7;
  return make_world(params);
}

void BM_EmitTrace(benchmark::State& state) {
  const SyntheticWorld world = bench_world();
  const auto pairs = make_pairs(world, 1, 3);
  ToyScoringPolicy policy(world_feature_fn(world), kWorldFeatureDim);
  const ReasoningTrace trace = policy.sample_trace(pairs[0].winner, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(emit_trace(trace, pairs[0].winner.principles));
  }
}
BENCHMARK(BM_EmitTrace);

void BM_ParseTrace(benchmark::State& state) {
  const SyntheticWorld world = bench_world();
  const auto pairs = make_pairs(world, 1, 3);
  ToyScoringPolicy policy(world_feature_fn(world), kWorldFeatureDim);
  const ReasoningTrace trace = policy.sample_trace(pairs[0].winner, 5);
  const RawTraceText raw = emit_trace(trace, pairs[0].winner.principles);
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_trace(raw, pairs[0].winner.principles));
  }
}
BENCHMARK(BM_ParseTrace);

// Full rollout + score + reward + gradient cost of one GCPO update on the
// toy policy, the inner loop of reward-model training.
void BM_GcpoStep(benchmark::State& state) {
  const SyntheticWorld world = bench_world();
  const auto pairs = make_pairs(world, 8, 3);
  OptimizerConfig cfg;
  cfg.group_size = static_cast<int>(state.range(0));
  cfg.learning_rate = 0.0;  // keep the parameters fixed across iterations
  for (auto _ : state) {
    ToyScoringPolicy policy(world_feature_fn(world), kWorldFeatureDim);
    benchmark::DoNotOptimize(gcpo_step(policy, pairs, cfg));
  }
}
BENCHMARK(BM_GcpoStep)->Arg(8)->Arg(24);

}  // namespace

BENCHMARK_MAIN();
