// Serial reference kernels against their OpenMP counterparts.
// Run with OMP_NUM_THREADS set to compare scaling.

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "alchemy/kernels.hpp"
#include "alchemy/rng.hpp"
#include "alchemy/synthetic.hpp"

namespace k = alchemy::kernels;

namespace {

struct SaeFixture {
  std::size_t n, d, m;
  std::vector<float> x, w, be, bd, z;
  std::vector<double> y, r, gw, gbe, gbd;
  std::vector<std::uint32_t> batch;

  SaeFixture(std::size_t rows, std::size_t dim, std::size_t latent)
      : n(rows), d(dim), m(latent), x(rows * dim), w(latent * dim), be(latent), bd(dim), z(rows * latent),
        y(rows), r(latent), gw(latent * dim), gbe(latent), gbd(dim), batch(std::min<std::size_t>(rows, 256)) {
    alchemy::Rng rng(0);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    for (auto& v : w) v = static_cast<float>(rng.normal() * 0.1);
    for (auto& v : y) v = rng.normal();
    std::iota(batch.begin(), batch.end(), 0u);
  }
  k::ConstMatrixView xv() const { return {x.data(), n, d}; }
  k::ConstMatrixView wv() const { return {w.data(), m, d}; }
  k::MatrixView zv() { return {z.data(), n, m}; }
};

template <bool Parallel>
void BM_Encode(benchmark::State& state) {
  SaeFixture f(4096, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::omp::encode(f.xv(), f.wv(), f.be, f.zv());
    } else {
      k::serial::encode(f.xv(), f.wv(), f.be, f.zv());
    }
    benchmark::DoNotOptimize(f.z.data());
  }
}

template <bool Parallel>
void BM_Pearson(benchmark::State& state) {
  SaeFixture f(10000, 8, static_cast<std::size_t>(state.range(0)));
  k::serial::encode(f.xv(), f.wv(), f.be, f.zv());
  const k::ConstMatrixView zv{f.z.data(), f.n, f.m};
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::omp::column_pearson(zv, f.y, f.r);
    } else {
      k::serial::column_pearson(zv, f.y, f.r);
    }
    benchmark::DoNotOptimize(f.r.data());
  }
}

template <bool Parallel>
void BM_SaeStep(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  SaeFixture f(1024, dim, dim);
  for (auto _ : state) {
    const k::SaeGradients g{f.gw, f.gbe, f.gbd};
    double loss;
    if constexpr (Parallel) {
      loss = k::omp::sae_loss_and_gradients(f.xv(), f.batch, f.wv(), f.be, f.bd, 1e-4, g);
    } else {
      loss = k::serial::sae_loss_and_gradients(f.xv(), f.batch, f.wv(), f.be, f.bd, 1e-4, g);
    }
    benchmark::DoNotOptimize(loss);
  }
}

template <bool Parallel>
void BM_Empowerment(benchmark::State& state) {
  const auto graph = alchemy::make_random_graph(static_cast<std::size_t>(state.range(0)),
                                                static_cast<std::size_t>(state.range(0)) * 5, 0);
  std::vector<double> prev(graph.size(), 1.0), next(graph.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::omp::empowerment_step(graph, 0.5, prev, next);
    } else {
      k::serial::empowerment_step(graph, 0.5, prev, next);
    }
    benchmark::DoNotOptimize(next.data());
  }
}

}  // namespace

BENCHMARK(BM_Encode<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Encode<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Pearson<false>)->Arg(256)->Arg(1024);
BENCHMARK(BM_Pearson<true>)->Arg(256)->Arg(1024);
BENCHMARK(BM_SaeStep<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_SaeStep<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Empowerment<false>)->Arg(720)->Arg(5000);
BENCHMARK(BM_Empowerment<true>)->Arg(720)->Arg(5000);

BENCHMARK_MAIN();
