#include <benchmark/benchmark.h>

#include <random>

#include "cyclepose/flowcodec.hpp"
#include "cyclepose/metrics.hpp"
#include "cyclepose/perlin.hpp"
#include "cyclepose/synthmask.hpp"

using namespace cyclepose;

static InstanceMask sampleMask(uint64_t seed) {
  std::mt19937_64 rng(seed);
  return synthmask::elasticDeform(synthmask::sampleEllipseMask({}, rng()), {}, rng());
}

static void BM_SampleEllipseMask(benchmark::State& state) {
  uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(synthmask::sampleEllipseMask({}, seed++));
}
BENCHMARK(BM_SampleEllipseMask)->Unit(benchmark::kMillisecond);

static void BM_ElasticDeform(benchmark::State& state) {
  const auto mask = synthmask::sampleEllipseMask({}, 2);
  uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(synthmask::elasticDeform(mask, {}, seed++));
}
BENCHMARK(BM_ElasticDeform)->Unit(benchmark::kMillisecond);

static void BM_RenderPerlinImage(benchmark::State& state) {
  const auto mask = sampleMask(3);
  uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(perlin::renderPerlinImage(mask, {}, seed++));
}
BENCHMARK(BM_RenderPerlinImage)->Unit(benchmark::kMillisecond);

static void BM_FractalPerlin(benchmark::State& state) {
  uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(perlin::fractalPerlin(224, 224, {}, seed++));
}
BENCHMARK(BM_FractalPerlin)->Unit(benchmark::kMillisecond);

static void BM_EncodeFlows(benchmark::State& state) {
  const auto mask = sampleMask(4);
  for (auto _ : state) benchmark::DoNotOptimize(flowcodec::encodeFlows(mask));
}
BENCHMARK(BM_EncodeFlows)->Unit(benchmark::kMillisecond);

static void BM_DecodeFlows(benchmark::State& state) {
  const auto flows = flowcodec::encodeFlows(sampleMask(5));
  for (auto _ : state) benchmark::DoNotOptimize(flowcodec::decodeFlows(flows));
}
BENCHMARK(BM_DecodeFlows)->Unit(benchmark::kMillisecond);

static void BM_MatchInstances(benchmark::State& state) {
  const auto gt = sampleMask(6);
  const auto pred = flowcodec::decodeFlows(flowcodec::encodeFlows(gt));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::matchInstances(pred, gt, 0.5));
}
BENCHMARK(BM_MatchInstances);

BENCHMARK_MAIN();
