// Serial vs OpenMP kernels on synthetic corpora. Sizes are the number of
// dialogues (or hypothesis/reference pairs).

#include <benchmark/benchmark.h>

#include "cfeg/common.hpp"
#include "cfeg/kernels.hpp"

namespace k = cfeg::kernels;

namespace {

std::vector<k::Tokens> corpus(std::size_t n, std::uint64_t seed) {
    cfeg::Rng rng(seed);
    std::vector<k::Tokens> out(n);
    for (auto& doc : out) {
        const auto len = 8 + rng.below(40);
        for (std::size_t i = 0; i < len; ++i) doc.push_back("w" + std::to_string(rng.below(2000)));
    }
    return out;
}

std::vector<k::TokenSet> sets(std::size_t n) {
    k::Interner in;
    std::vector<k::TokenSet> out;
    for (const auto& d : corpus(n, 1)) out.push_back(in.set_of(d));
    return out;
}

template <auto Fn>
void jaccard(benchmark::State& state) {
    const auto pool = sets(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(pool.front(), pool));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void bleu(benchmark::State& state) {
    const auto hyp = corpus(state.range(0), 2), ref = corpus(state.range(0), 3);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(hyp, ref, 4));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void ngrams(benchmark::State& state) {
    const auto docs = corpus(state.range(0), 4);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(docs, 2));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(jaccard<k::serial::jaccard_scores>)->Name("jaccard/serial")->Arg(2000)->Arg(20000)->UseRealTime();
BENCHMARK(jaccard<k::parallel::jaccard_scores>)->Name("jaccard/parallel")->Arg(2000)->Arg(20000)->UseRealTime();
BENCHMARK(bleu<k::serial::mean_bleu>)->Name("mean_bleu/serial")->Arg(2485)->Arg(20000)->UseRealTime();
BENCHMARK(bleu<k::parallel::mean_bleu>)->Name("mean_bleu/parallel")->Arg(2485)->Arg(20000)->UseRealTime();
BENCHMARK(ngrams<k::serial::ngram_counts>)->Name("ngram_counts/serial")->Arg(2485)->Arg(20000)->UseRealTime();
BENCHMARK(ngrams<k::parallel::ngram_counts>)->Name("ngram_counts/parallel")->Arg(2485)->Arg(20000)->UseRealTime();

BENCHMARK_MAIN();
