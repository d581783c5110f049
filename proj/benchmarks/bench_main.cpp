// Microbenchmarks for the hot paths: answer extraction, bucketing, voting,
// judge-output parsing, and cache keying. Run with --benchmark_filter=...

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "aor/baselines.hpp"
#include "aor/client.hpp"
#include "aor/core.hpp"
#include "aor/extraction.hpp"
#include "aor/judge.hpp"

namespace {

std::vector<aor::ReasoningChain> synthetic_chains(int n) {
    static const char* answers[] = {"A", "B", "C", "D", "E"};
    std::mt19937 rng(42);
    std::uniform_int_distribution<int> pick(0, 4);
    std::vector<aor::ReasoningChain> chains;
    chains.reserve(n);
    for (int i = 0; i < n; ++i) {
        aor::ReasoningChain chain;
        chain.index = i + 1;
        chain.rationale_text =
            "step one\nstep two\nstep three considering case " + std::to_string(i) +
            "\nThe answer is (" + answers[pick(rng)] + ").";
        chain.extracted_answer = answers[pick(rng)];
        chains.push_back(std::move(chain));
    }
    return chains;
}

void BM_extract_answer(benchmark::State& state) {
    const std::string text =
        "First compute 12 * 4 = 48, subtract the 6 damaged units to get 42,\n"
        "then sanity-check against the total. The answer is 42.";
    for (auto _ : state) {
        benchmark::DoNotOptimize(aor::extract_answer(text, aor::TaskKind::numeric));
    }
}
BENCHMARK(BM_extract_answer);

void BM_bucket_by_answer(benchmark::State& state) {
    auto chains = synthetic_chains(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(aor::bucket_by_answer(chains));
    }
}
BENCHMARK(BM_bucket_by_answer)->Arg(40)->Arg(400);

void BM_self_consistency(benchmark::State& state) {
    auto chains = synthetic_chains(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            aor::self_consistency(chains, aor::TaskKind::multiple_choice));
    }
}
BENCHMARK(BM_self_consistency)->Arg(40)->Arg(400);

void BM_complexity_consistency(benchmark::State& state) {
    auto chains = synthetic_chains(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(aor::complexity_consistency(
            chains, aor::TaskKind::multiple_choice, 0.5));
    }
}
BENCHMARK(BM_complexity_consistency)->Arg(40)->Arg(400);

void BM_parse_scores(benchmark::State& state) {
    std::vector<int> scores{8, 6, 9, 7, 10};
    const std::string raw = aor::render_scores(scores);
    for (auto _ : state) {
        benchmark::DoNotOptimize(aor::parse_scores(raw, 5));
    }
}
BENCHMARK(BM_parse_scores);

void BM_cache_key(benchmark::State& state) {
    auto chains = synthetic_chains(1);
    const std::string prompt(static_cast<std::size_t>(state.range(0)), 'q');
    aor::SamplingParams params;
    params.sample_tag = 7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(aor::cache_key("gpt-3.5-turbo", prompt, params));
    }
}
BENCHMARK(BM_cache_key)->Arg(1000)->Arg(20000);

} // namespace

BENCHMARK_MAIN();
