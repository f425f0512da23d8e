#include <benchmark/benchmark.h>

#include "textsynth/gan.hpp"

using namespace textsynth;

namespace {

Tensor<float> bench_input(int n, int c, int side) {
  Rng rng(3);
  Tensor<float> t({n, c, side, side});
  for (float& v : t.data) v = float(rng.uniform());
  return t;
}

}  // namespace

static void BM_GeneratorForward(benchmark::State& state) {
  const int side = int(state.range(0));
  ParameterStore<float> store;
  Rng rng(1);
  nets::init_generator(store, 0.25, rng);
  Tensor<float> x = bench_input(1, 4, side);
  for (auto _ : state) {
    Graph<float> g(&store);
    auto in = g.input({1, 4, side, side});
    auto out = nets::build_generator(g, in, 0.25);
    g.forward({{in, x}});
    benchmark::DoNotOptimize(g.value(out).data.data());
  }
}
BENCHMARK(BM_GeneratorForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_GeneratorForwardBackward(benchmark::State& state) {
  const int side = int(state.range(0));
  ParameterStore<float> store;
  Rng rng(1);
  nets::init_generator(store, 0.25, rng);
  Tensor<float> x = bench_input(4, 4, side);
  for (auto _ : state) {
    store.zero_grads();
    Graph<float> g(&store);
    auto in = g.input({4, 4, side, side});
    auto out = g.reduce_mean(nets::build_generator(g, in, 0.25));
    g.forward({{in, x}});
    g.backward(out);
    benchmark::DoNotOptimize(store.grad("G/b1_w").data.data());
  }
}
BENCHMARK(BM_GeneratorForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
