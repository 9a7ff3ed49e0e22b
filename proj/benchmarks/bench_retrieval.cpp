#include <benchmark/benchmark.h>

#include <vector>

#include "pft/retrieval.hpp"
#include "pft/vit.hpp"

namespace {

void BM_Evaluate(benchmark::State& state) {
  const auto q = static_cast<std::size_t>(state.range(0));
  const std::size_t g = 4 * q, d = 320;
  pft::Rng rng(3);
  pft::Tensor qf({q, d}), gf({g, d});
  pft::fill_normal(qf, 1.0, rng);
  pft::fill_normal(gf, 1.0, rng);
  std::vector<std::size_t> qid(q), gid(g), qcam(q, 0), gcam(g, 1);
  for (std::size_t i = 0; i < q; ++i) qid[i] = i % 50;
  for (std::size_t i = 0; i < g; ++i) gid[i] = i % 50;
  for (auto _ : state) {
    auto dist = pft::distance_matrix(qf, gf, pft::Metric::cosine);
    auto report = pft::evaluate(dist, qid, gid, qcam, gcam);
    benchmark::DoNotOptimize(report.map);
  }
}

BENCHMARK(BM_Evaluate)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace
