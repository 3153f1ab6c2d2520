#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "barysid/kernels.hpp"
#include "barysid/plant_lab.hpp"

using namespace barysid;

namespace {

std::vector<double> log_grid(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 2 * M_PI * 0.5 * std::pow(180.0, double(i) / double(n - 1));
  return w;
}

// dim channels, records of varying length filled from a fixed seed
struct Records {
  Index dim;
  std::vector<Matrix> data;

  Records(Index dim_, Index count, Index length) : dim(dim_) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (Index k = 0; k < count; ++k) {
      Matrix m(dim, length + 97 * k);
      for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < dim; ++i) m(i, j) = nd(rng);
      data.push_back(std::move(m));
    }
  }

  kernels::RecordStream stream() const {
    return [this](Index r, const kernels::ChunkSink& sink) {
      const Matrix& m = data[r];
      for (Index c = 0; c < m.cols(); c += 512) {
        Index len = std::min<Index>(512, m.cols() - c);
        sink(m.middleCols(c, len));
      }
    };
  }
};

void BM_ResponseGridSerial(benchmark::State& st) {
  PlantSpec spec;
  spec.n_modes = int(st.range(0));
  FrequencyResponseEvaluator eval(synth_plant(spec));
  auto w = log_grid(10000);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::response_grid(eval, w));
}

void BM_ResponseGridOmp(benchmark::State& st) {
  PlantSpec spec;
  spec.n_modes = int(st.range(0));
  FrequencyResponseEvaluator eval(synth_plant(spec));
  auto w = log_grid(10000);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::omp::response_grid(eval, w));
}

void BM_CovarianceSerial(benchmark::State& st) {
  Records rec(st.range(0), 8, 20000);
  auto s = rec.stream();
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::serial::accumulate_covariance(rec.dim, 8, s));
}

void BM_CovarianceOmp(benchmark::State& st) {
  Records rec(st.range(0), 8, 20000);
  auto s = rec.stream();
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::omp::accumulate_covariance(rec.dim, 8, s));
}

}  // namespace

BENCHMARK(BM_ResponseGridSerial)->Arg(20)->Arg(135)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ResponseGridOmp)->Arg(20)->Arg(135)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CovarianceSerial)->Arg(12)->Arg(44)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CovarianceOmp)->Arg(12)->Arg(44)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
