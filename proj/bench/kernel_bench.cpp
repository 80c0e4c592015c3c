// Serial reference kernels against their OpenMP builds.
#include <benchmark/benchmark.h>

#include "coreguard/kernels.hpp"
#include "coreguard/linalg.hpp"
#include "coreguard/random.hpp"
#include "coreguard/transformer.hpp"

namespace {

using namespace coreguard;

template <class Fn>
void bench_matmul(benchmark::State& state, Fn fn) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = random_matrix(rng, n, n, 1.0f);
  const Matrix b = random_matrix(rng, n, n, 1.0f);
  for (auto _ : state) benchmark::DoNotOptimize(fn(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <class Fn>
void bench_attention(benchmark::State& state, Fn fn) {
  const auto l = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 256;
  Rng rng(2);
  const Matrix q = random_matrix(rng, l, d, 1.0f);
  const Matrix k = random_matrix(rng, l, d, 1.0f);
  const Matrix v = random_matrix(rng, l, d, 1.0f);
  for (auto _ : state) benchmark::DoNotOptimize(fn(q, k, v, 8, true));
}

template <class Fn>
void bench_norm(benchmark::State& state, Fn fn) {
  const auto l = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 1024;
  Rng rng(3);
  const Matrix x = random_matrix(rng, l, d, 1.0f);
  const Vector gamma(d, 1.0f), beta(d, 0.0f);
  for (auto _ : state) benchmark::DoNotOptimize(fn(x, gamma, beta, kNormEpsilon));
}

void BM_MatmulSerial(benchmark::State& s) { bench_matmul(s, kernels::serial::matmul); }
void BM_MatmulParallel(benchmark::State& s) { bench_matmul(s, kernels::parallel::matmul); }
void BM_AttentionSerial(benchmark::State& s) { bench_attention(s, kernels::serial::attention); }
void BM_AttentionParallel(benchmark::State& s) {
  bench_attention(s, kernels::parallel::attention);
}
void BM_LayerNormSerial(benchmark::State& s) { bench_norm(s, kernels::serial::layer_norm); }
void BM_LayerNormParallel(benchmark::State& s) { bench_norm(s, kernels::parallel::layer_norm); }

void BM_Forward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.num_layers = 4;
  cfg.d_model = 128;
  cfg.num_heads = 4;
  cfg.d_ffn = 512;
  cfg.seq_len = 64;
  cfg.vocab_size = 512;
  const Model m = random_model(cfg, 4);
  const auto seqs = random_sequences(5, 1, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(model_forward(m, seqs.front()));
}

BENCHMARK(BM_MatmulSerial)->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_MatmulParallel)->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_AttentionSerial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_AttentionParallel)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_LayerNormSerial)->Arg(128)->Arg(1024);
BENCHMARK(BM_LayerNormParallel)->Arg(128)->Arg(1024);
BENCHMARK(BM_Forward);

}  // namespace

BENCHMARK_MAIN();
