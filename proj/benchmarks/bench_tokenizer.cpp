#include "bench_data.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_EncodeUncached(benchmark::State &state)
{
    const auto tok = bench::gpt2();
    const auto text = bench::fixture_text().substr(0, 64 * 1024);
    for (auto _ : state) {
        benchmark::DoNotOptimize(tok->encode(text));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_EncodeUncached);

void BM_EncodeCached(benchmark::State &state)
{
    const auto tok = bench::gpt2();
    const auto text = bench::fixture_text().substr(0, 64 * 1024);
    ptkit::bpe::EncodeCache cache;
    for (auto _ : state) {
        benchmark::DoNotOptimize(tok->encode(text, cache));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_EncodeCached);

void BM_Decode(benchmark::State &state)
{
    const auto tok = bench::gpt2();
    const auto ids = tok->encode(bench::fixture_text().substr(0, 64 * 1024));
    for (auto _ : state) {
        benchmark::DoNotOptimize(tok->decode(ids));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ids.size()));
}
BENCHMARK(BM_Decode);

} // namespace
