// Serial reference kernels against their OpenMP counterparts, plus one full
// attack iteration budget on the synthetic benchmark.

#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "segia/attack.hpp"
#include "segia/graph.hpp"
#include "segia/kernels.hpp"
#include "segia/surrogate.hpp"

namespace {

segia::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  segia::Matrix m(r, c);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

const segia::AttributedGraph& bench_graph(std::size_t n) {
  static std::map<std::size_t, segia::AttributedGraph> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    segia::SyntheticSpec spec;
    spec.n = n;
    spec.p_in = 20.0 / static_cast<double>(n);
    spec.p_out = 2.0 / static_cast<double>(n);
    spec.d = 64;
    it = cache.emplace(n, segia::generate_synthetic(spec)).first;
  }
  return it->second;
}

template <bool Parallel>
void BM_Spmm(benchmark::State& state) {
  const auto& g = bench_graph(static_cast<std::size_t>(state.range(0)));
  const auto adj = segia::normalize_adjacency(g.topology());
  for (auto _ : state) {
    auto y = Parallel ? segia::kernels::spmm(adj.matrix, g.features())
                      : segia::kernels::reference::spmm(adj.matrix, g.features());
    benchmark::DoNotOptimize(y.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(adj.matrix.values().size()));
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 64, 1);
  const auto b = random_matrix(64, 64, 2);
  for (auto _ : state) {
    auto y = Parallel ? segia::kernels::gemm(a, b) : segia::kernels::reference::gemm(a, b);
    benchmark::DoNotOptimize(y.values().data());
  }
}

template <bool Parallel>
void BM_GemmTN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, 64, 3);
  const auto b = random_matrix(n, 64, 4);
  for (auto _ : state) {
    auto y = Parallel ? segia::kernels::gemm_tn(a, b) : segia::kernels::reference::gemm_tn(a, b);
    benchmark::DoNotOptimize(y.values().data());
  }
}

void BM_SegiaRun(benchmark::State& state) {
  const auto& g = bench_graph(400);
  const auto model = segia::train(segia::SurrogateModel::initial(segia::Variant::PrSGC, g.n_features(),
                                                                 g.n_classes(), 0, 0.1),
                                  g, {})
                         .model;
  segia::AttackConfig cfg;
  cfg.iterations = 20;
  cfg.depth = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto r = segia::run_segia(g, model, cfg);
    benchmark::DoNotOptimize(r.trace.best_loss);
  }
}

}  // namespace

BENCHMARK(BM_Spmm<false>)->Arg(2000)->Arg(20000)->Name("spmm/serial");
BENCHMARK(BM_Spmm<true>)->Arg(2000)->Arg(20000)->Name("spmm/openmp");
BENCHMARK(BM_Gemm<false>)->Arg(2000)->Arg(20000)->Name("gemm/serial");
BENCHMARK(BM_Gemm<true>)->Arg(2000)->Arg(20000)->Name("gemm/openmp");
BENCHMARK(BM_GemmTN<false>)->Arg(2000)->Arg(20000)->Name("gemm_tn/serial");
BENCHMARK(BM_GemmTN<true>)->Arg(2000)->Arg(20000)->Name("gemm_tn/openmp");
BENCHMARK(BM_SegiaRun)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
