#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "ccg/kernels.hpp"

namespace {

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<std::string> random_sentences(std::size_t n, std::uint64_t seed) {
  static const char* words[] = {"graph", "neural", "network", "model", "the", "we", "use", "results",
                                "outperform", "baseline", "attention", "layer", "training", "data"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(8, 30), w(0, 13);
  std::vector<std::string> out(n);
  for (auto& s : out)
    for (int i = len(rng); i > 0; --i) s += std::string(words[w(rng)]) + " ";
  return out;
}

template <auto Fn>
void BM_gemm_nt(benchmark::State& state) {
  const std::size_t m = state.range(0), n = 64, k = 64;
  const auto a = random_matrix(m * k, 1), b = random_matrix(n * k, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    Fn(a.data(), b.data(), c.data(), m, n, k);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * m * n * k);
}

template <auto Fn>
void BM_cosine(benchmark::State& state) {
  const std::size_t a = state.range(0), b = 256, d = 64;
  const auto x = random_matrix(a * d, 3), y = random_matrix(b * d, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(x.data(), a, y.data(), b, d));
  state.SetItemsProcessed(state.iterations() * a * b);
}

template <auto Fn>
void BM_rouge(benchmark::State& state) {
  const auto c = random_sentences(state.range(0), 5), r = random_sentences(state.range(0), 6);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(c, r));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_gemm_nt<ccg::kernels::serial::gemm_nt>)->Arg(256)->Arg(2048);
BENCHMARK(BM_gemm_nt<ccg::kernels::parallel::gemm_nt>)->Arg(256)->Arg(2048);
BENCHMARK(BM_cosine<ccg::kernels::serial::cosine_matrix>)->Arg(64)->Arg(1024);
BENCHMARK(BM_cosine<ccg::kernels::parallel::cosine_matrix>)->Arg(64)->Arg(1024);
BENCHMARK(BM_rouge<ccg::kernels::serial::rouge_pairs>)->Arg(256)->Arg(4096);
BENCHMARK(BM_rouge<ccg::kernels::parallel::rouge_pairs>)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
