#include "bench_data.hpp"

#include "ptkit/corpus.hpp"
#include "ptkit/text_normalize.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

std::vector<std::string> fixture_docs()
{
    std::vector<std::string> docs;
    ptkit::corpus::JsonlSource src(bench::kData / "corpus/fixture.jsonl");
    while (auto doc = src.next()) {
        docs.push_back(std::move(doc->text));
    }
    return docs;
}

void BM_NormalizeText(benchmark::State &state)
{
    const auto docs = fixture_docs();
    std::size_t bytes = 0;
    for (auto _ : state) {
        for (const auto &d : docs) {
            benchmark::DoNotOptimize(ptkit::normalize_text(d));
            bytes += d.size();
        }
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_NormalizeText);

void BM_QualityFilters(benchmark::State &state)
{
    const auto docs = fixture_docs();
    const ptkit::corpus::FilterConfig cfg;
    std::size_t bytes = 0;
    for (auto _ : state) {
        for (const auto &d : docs) {
            ptkit::corpus::RawDocument doc;
            doc.text = d;
            benchmark::DoNotOptimize(ptkit::corpus::apply_quality_filters(doc, cfg));
            bytes += d.size();
        }
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_QualityFilters);

void BM_RepetitionStats(benchmark::State &state)
{
    const auto docs = fixture_docs();
    std::size_t bytes = 0;
    for (auto _ : state) {
        for (const auto &d : docs) {
            benchmark::DoNotOptimize(ptkit::corpus::repetition_stats(d));
            bytes += d.size();
        }
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_RepetitionStats);

} // namespace
