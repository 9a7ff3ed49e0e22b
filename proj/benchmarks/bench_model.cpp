#include <benchmark/benchmark.h>

#include "pft/dataset.hpp"
#include "pft/model.hpp"
#include "pft/trainer.hpp"

namespace {

pft::ModelConfig desk_config(bool full) {
  pft::ModelConfig cfg;
  cfg.modules = full ? pft::ModuleSwitches{} : pft::ModuleSwitches{false, false, false};
  return cfg;
}

void BM_Embed(benchmark::State& state) {
  pft::PftModel model(desk_config(state.range(0) != 0), 1);
  const auto rec = pft::generate_identity(0, 0, 0, 0);
  for (auto _ : state) {
    auto e = model.embed(rec.image);
    benchmark::DoNotOptimize(e.data().data());
  }
}

BENCHMARK(BM_Embed)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// One optimisation step of the full topology on a 16-image batch.
void BM_TrainStep(benchmark::State& state) {
  pft::PftModel model(desk_config(true), 1);
  const auto data = pft::generate_dataset({0, 8, 0, 16, 2});
  pft::TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.total_steps = 1;
  cfg.warmup_steps = 0;
  for (auto _ : state) {
    auto result = pft::train(model, cfg, data);
    benchmark::DoNotOptimize(result.log.back().loss);
  }
}

BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
