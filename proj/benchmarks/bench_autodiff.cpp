#include <benchmark/benchmark.h>

#include "pft/autodiff.hpp"
#include "pft/vit.hpp"

namespace {

// Forward + backward of a square matmul, the dominant kernel of the encoder.
void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  pft::Rng rng(1);
  pft::Tensor a({n, n}), b({n, n});
  pft::fill_normal(a, 1.0, rng);
  pft::fill_normal(b, 1.0, rng);
  for (auto _ : state) {
    pft::ad::Tape tape;
    auto out = pft::ad::sum(pft::ad::matmul(tape.input(a), tape.input(b)));
    tape.backward(out);
    benchmark::DoNotOptimize(out.value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(3 * n * n * n));
}

BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_EncoderBlock(benchmark::State& state) {
  pft::Rng rng(2);
  auto block = pft::EncoderBlock::init(64, 4, 256, 0.02, rng);
  pft::Tensor x({73, 64});
  pft::fill_normal(x, 1.0, rng);
  for (auto _ : state) {
    pft::ad::Tape tape;
    auto out = pft::apply_block(tape, block, tape.input(x)).out;
    auto loss = pft::ad::mean(out);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}

BENCHMARK(BM_EncoderBlock);

}  // namespace
