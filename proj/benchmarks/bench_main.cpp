#include <benchmark/benchmark.h>

#include <random>

#include "msgf/fixture.hpp"
#include "msgf/mafl.hpp"
#include "msgf/metrics.hpp"

using namespace msgf;

namespace {

Tensor noise(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor t(shape);
  for (double& x : t.data()) x = u(rng);
  return t;
}

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const Var x = Var::constant(noise({c, n, n}, 1));
  const Var k = Var::constant(noise({c, c, 3, 3}, 2));
  NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k).value().data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c * c * n * n * 9));
}
BENCHMARK(BM_Conv2d)->Args({4, 32})->Args({16, 32})->Args({16, 64});

void BM_FusePair(benchmark::State& state) {
  const DataSample s = make_fixture_sample({static_cast<std::size_t>(state.range(0)), 0});
  const FusionModel m{RunConfig{}};
  for (auto _ : state) {
    ImageGray f = fuse_pair(s.ir, s.vi, s.annotation, s.regions, m);
    benchmark::DoNotOptimize(f.pixels.data());
  }
}
BENCHMARK(BM_FusePair)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const DataSample s = make_fixture_sample();
  FusionModel m{RunConfig{}};
  TrainOptions opts;
  opts.max_steps = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(m, {s}, opts).step_losses.back().total);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ImageGray ir = make_disk_image(n), vi = make_texture_image(n, 0);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_fusion(vi, ir, vi).qabf);
}
BENCHMARK(BM_Metrics)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
