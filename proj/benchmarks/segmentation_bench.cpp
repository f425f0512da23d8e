#include <benchmark/benchmark.h>

#include "textsynth/rng.hpp"
#include "textsynth/segmentation.hpp"

using namespace textsynth;

namespace {

RasterImage bench_image(int side) {
  Rng rng(7);
  RasterImage img(side, side, 3);
  for (float& v : img.data) v = float(rng.uniform());
  return img;
}

}  // namespace

static void BM_SlicSuperpixels(benchmark::State& state) {
  RasterImage img = bench_image(int(state.range(0)));
  int k = scaled_superpixel_count(300, img.pixel_count());
  for (auto _ : state) {
    RegionMap map = slic_superpixels(img, k, 10.0, 10);
    benchmark::DoNotOptimize(map.labels.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SlicSuperpixels)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_EnforceConnectivity(benchmark::State& state) {
  RasterImage img = bench_image(int(state.range(0)));
  int k = scaled_superpixel_count(300, img.pixel_count());
  RegionMap map = slic_superpixels(img, k, 10.0, 5);
  for (auto _ : state) {
    RegionMap out = enforce_connectivity(map);
    benchmark::DoNotOptimize(out.labels.data());
  }
}
BENCHMARK(BM_EnforceConnectivity)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_MergeSimilar(benchmark::State& state) {
  RasterImage img = bench_image(int(state.range(0)));
  int k = scaled_superpixel_count(300, img.pixel_count());
  RegionMap map = enforce_connectivity(slic_superpixels(img, k, 10.0, 5));
  for (auto _ : state) {
    RegionMap out = merge_similar(map, img, 8.0);
    benchmark::DoNotOptimize(out.labels.data());
  }
}
BENCHMARK(BM_MergeSimilar)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
