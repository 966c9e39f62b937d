#include "ptkit/eval.hpp"
#include "ptkit/train_math.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

std::vector<double> random_logits(std::size_t n)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-20.0, 20.0);
    std::vector<double> z(n);
    for (auto &x : z) {
        x = d(rng);
    }
    return z;
}

void BM_ZLoss(benchmark::State &state)
{
    const auto z = random_logits(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ptkit::train::zloss(z));
    }
}
BENCHMARK(BM_ZLoss)->Arg(64)->Arg(32000)->Arg(50257);

void BM_ZLossGrad(benchmark::State &state)
{
    const auto z = random_logits(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ptkit::train::zloss_grad(z));
    }
}
BENCHMARK(BM_ZLossGrad)->Arg(64)->Arg(32000)->Arg(50257);

void BM_AdaFactorStep(benchmark::State &state)
{
    const ptkit::train::TensorList theta = {random_logits(static_cast<std::size_t>(state.range(0)))};
    const ptkit::train::TensorList grad = {random_logits(theta[0].size())};
    const auto zeros = ptkit::train::OptimizerState::zeros_like(theta);
    const ptkit::train::OptimizerConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ptkit::train::adafactor_step(theta, grad, zeros, 1e-3, cfg));
    }
}
BENCHMARK(BM_AdaFactorStep)->Arg(4096)->Arg(1 << 20);

void BM_Npm(benchmark::State &state)
{
    std::vector<ptkit::eval::MetricResult> results;
    for (const auto &entry : ptkit::eval::poeta_registry()) {
        ptkit::eval::MetricResult r;
        r.task = entry.name;
        r.origin = entry.origin;
        r.raw = (entry.random_score + entry.high_score) / 2;
        r.random_score = entry.random_score;
        r.high_score = entry.high_score;
        results.push_back(r);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(ptkit::eval::compute_npm(results));
    }
}
BENCHMARK(BM_Npm);

} // namespace
