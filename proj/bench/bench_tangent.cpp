#include "tangentkit/parallel.hpp"
#include "tangentkit/tangent.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace tk;

namespace {

nn::MlpParams bench_net(int width) {
    return nn::mlp_init(nn::MlpArch{{8, width, width, 4}, nn::Activation::relu, true}, 3);
}

Matrix bench_inputs(Eigen::Index n) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x(n, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    return x;
}

Exec policy(const benchmark::State& state) { return state.range(1) ? Exec::parallel : Exec::serial; }

void BM_tangent_features(benchmark::State& state) {
    const auto params = bench_net(64);
    const Matrix x = bench_inputs(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(tangent::tangent_features(params, x, policy(state)).rows.data());
    state.SetLabel(state.range(1) ? "openmp" : "serial");
}

void BM_tangent_kernel(benchmark::State& state) {
    const auto params = bench_net(64);
    const auto phi = tangent::tangent_features(params, bench_inputs(state.range(0)), Exec::serial);
    for (auto _ : state) benchmark::DoNotOptimize(tangent::tangent_kernel(phi, policy(state)).entries.data());
    state.SetLabel(state.range(1) ? "openmp" : "serial");
}

}  // namespace

BENCHMARK(BM_tangent_features)->ArgsProduct({{64, 256}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_tangent_kernel)->ArgsProduct({{64, 256}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
