#include <benchmark/benchmark.h>

#include <random>

#include "novelplan/cem.hpp"
#include "novelplan/chamfer.hpp"
#include "novelplan/dataset.hpp"
#include "novelplan/nn.hpp"

using namespace novelplan;

namespace {

std::vector<sim::Point> random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<sim::Point> c(n);
  for (auto& p : c) p = {u(rng), u(rng)};
  return c;
}

void BM_ChamferSerial(benchmark::State& st) {
  const auto a = random_cloud(static_cast<std::size_t>(st.range(0)), 1);
  const auto b = random_cloud(static_cast<std::size_t>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(chamfer_serial(a, b));
}
BENCHMARK(BM_ChamferSerial)->Arg(16)->Arg(256)->Arg(2048);

void BM_ChamferParallel(benchmark::State& st) {
  const auto a = random_cloud(static_cast<std::size_t>(st.range(0)), 1);
  const auto b = random_cloud(static_cast<std::size_t>(st.range(0)), 2);
  for (auto _ : st) benchmark::DoNotOptimize(chamfer_parallel(a, b));
}
BENCHMARK(BM_ChamferParallel)->Arg(16)->Arg(256)->Arg(2048);

std::vector<float> random_rows(std::size_t count, std::size_t dim) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> x(count * dim);
  for (auto& v : x) v = u(rng);
  return x;
}

void BM_EncoderRowsSerial(benchmark::State& st) {
  const nn::DenseNet net(nn::mlp({1024, 128, 32}, nn::Activation::tanh, nn::Activation::identity), 1);
  const auto x = random_rows(static_cast<std::size_t>(st.range(0)), 1024);
  for (auto _ : st) benchmark::DoNotOptimize(nn::forward_rows_serial(net, x));
}
BENCHMARK(BM_EncoderRowsSerial)->Arg(64)->Arg(512);

void BM_EncoderRowsParallel(benchmark::State& st) {
  const nn::DenseNet net(nn::mlp({1024, 128, 32}, nn::Activation::tanh, nn::Activation::identity), 1);
  const auto x = random_rows(static_cast<std::size_t>(st.range(0)), 1024);
  for (auto _ : st) benchmark::DoNotOptimize(nn::forward_rows_parallel(net, x));
}
BENCHMARK(BM_EncoderRowsParallel)->Arg(64)->Arg(512);

const nn::DenseNet& cost_net() {
  static const nn::DenseNet net(nn::mlp({52, 128, 128, 32}, nn::Activation::tanh, nn::Activation::identity), 2);
  return net;
}

plan::CostFn rollout_like_cost() {
  return [](std::span<const float> a) {
    plan::CostBreakdown c;
    std::vector<float> z(52, 0.0f);
    for (std::size_t t = 0; t < a.size() / 4; ++t) {
      std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(4 * t), 4, z.begin() + 48);
      const auto y = cost_net().forward(z);
      std::copy(y.begin(), y.end(), z.begin());
      c.novelty.push_back(0.0);
    }
    for (float v : std::span(z).first(32)) c.goal += v * v;
    c.total = c.goal;
    return c;
  };
}

void BM_CemBatchSerial(benchmark::State& st) {
  const auto samples = random_rows(128, 20);
  const auto cost = rollout_like_cost();
  for (auto _ : st) benchmark::DoNotOptimize(plan::evaluate_batch_serial(cost, samples, 20));
}
BENCHMARK(BM_CemBatchSerial);

void BM_CemBatchParallel(benchmark::State& st) {
  const auto samples = random_rows(128, 20);
  const auto cost = rollout_like_cost();
  for (auto _ : st) benchmark::DoNotOptimize(plan::evaluate_batch_parallel(cost, samples, 20));
}
BENCHMARK(BM_CemBatchParallel);

void BM_GenerateSerial(benchmark::State& st) {
  const data::PolicySpec policy{data::PolicyKind::gapped, data::GapRegion::start_x_positive()};
  for (auto _ : st) benchmark::DoNotOptimize(data::generate_serial(sim::EnvKind::granular, policy, 16, 20, 1));
}
BENCHMARK(BM_GenerateSerial)->Unit(benchmark::kMillisecond);

void BM_GenerateParallel(benchmark::State& st) {
  const data::PolicySpec policy{data::PolicyKind::gapped, data::GapRegion::start_x_positive()};
  for (auto _ : st) benchmark::DoNotOptimize(data::generate(sim::EnvKind::granular, policy, 16, 20, 1));
}
BENCHMARK(BM_GenerateParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
