// Microbenchmarks for the hot loops: one ALS run, one classifier epoch,
// ranking evaluation, and codebook fitting.

#include <benchmark/benchmark.h>

#include <random>

#include "plcont/classifier.hpp"
#include "plcont/evaluator.hpp"
#include "plcont/factorization.hpp"
#include "plcont/features.hpp"
#include "plcont/interactions.hpp"
#include "plcont/synth.hpp"

using namespace plcont;

namespace {

const SynthData& corpus() {
    static const SynthData data = [] {
        SynthConfig c;  // 2000 songs, 300 playlists
        c.seed = 1;
        return generate(c);
    }();
    return data;
}

void BM_WmfSweep(benchmark::State& state) {
    const InteractionMatrix m = build_interactions(corpus().split.train);
    WmfConfig cfg;
    cfg.depth = static_cast<std::size_t>(state.range(0));
    cfg.sweeps = 1;
    for (auto _ : state) benchmark::DoNotOptimize(wmf_fit(m, cfg));
    state.counters["nnz"] = static_cast<double>(m.n_pairs());
}
BENCHMARK(BM_WmfSweep)->Arg(32)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_MlpEpoch(benchmark::State& state) {
    const FeatureMatrix features = preprocess(corpus().features, Preprocessing::standardize_l2);
    Architecture arch;
    arch.hidden_layers = 2;
    arch.hidden_units = static_cast<std::size_t>(state.range(0));
    TrainConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(fit_epochs(corpus().split.train, features, arch, cfg, 1));
}
BENCHMARK(BM_MlpEpoch)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
    const SplitCorpus split = merge_validation(corpus().split);
    const EvaluationSet set(split);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    RowMatrix scores(static_cast<Eigen::Index>(set.n_playlists()), static_cast<Eigen::Index>(set.n_candidates()));
    for (Eigen::Index i = 0; i < scores.size(); ++i) scores.data()[i] = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(scores, set));
    state.counters["candidates"] = static_cast<double>(set.n_candidates());
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    RowMatrix points(5000, 12);
    for (Eigen::Index i = 0; i < points.size(); ++i) points.data()[i] = g(rng);
    KMeansOptions options;
    options.k = static_cast<std::size_t>(state.range(0));
    options.max_iterations = 20;
    for (auto _ : state) benchmark::DoNotOptimize(fit_codebook(points, options));
}
BENCHMARK(BM_KMeans)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
