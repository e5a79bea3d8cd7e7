#include <benchmark/benchmark.h>

#include "eegattr/attribution.hpp"
#include "eegattr/engine.hpp"
#include "eegattr/evaluation.hpp"
#include "eegattr/models.hpp"
#include "eegattr/pipeline.hpp"
#include "eegattr/rng.hpp"
#include "eegattr/synth.hpp"

using namespace eegattr;

namespace {

const std::vector<std::string> kChannels{"FZ", "C3", "CZ", "C4", "T3", "T4", "PZ", "OZ"};
constexpr std::size_t kLength = 384;

Tensor noise(std::size_t n, std::size_t t, std::uint64_t seed) {
    CounterRng rng(seed);
    Tensor x({n, t});
    for (auto& v : x.values()) v = static_cast<float>(rng.normal());
    return x;
}

/// Default-width network with batch statistics from 16 noise inputs.
struct Fixture {
    NetworkSpec net;
    BatchStats stats;
    Tensor x;

    explicit Fixture(bool eegnet) {
        net = eegnet ? build_eegnet(kChannels.size(), kLength, 2, {}, 1)
                     : build_interpretable_cnn(kChannels.size(), kLength, 2, {}, 1);
        std::vector<Tensor> batch;
        for (std::uint64_t i = 0; i < 16; ++i) batch.push_back(noise(kChannels.size(), kLength, i));
        stats = compute_batch_stats(net, batch);
        x = noise(kChannels.size(), kLength, 99);
    }
};

const Fixture& icnn() {
    static const Fixture f(false);
    return f;
}

const Fixture& eegnet() {
    static const Fixture f(true);
    return f;
}

void BM_Forward(benchmark::State& state) {
    const auto& f = state.range(0) ? eegnet() : icnn();
    for (auto _ : state) benchmark::DoNotOptimize(forward(f.net, f.x, f.stats));
    state.SetLabel(f.net.name);
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1);

void BM_Attribute(benchmark::State& state) {
    const auto& f = icnn();
    const auto& name = method_names()[static_cast<std::size_t>(state.range(0))];
    const auto spec = method_from_name(name);
    for (auto _ : state) benchmark::DoNotOptimize(attribute(f.net, f.x, f.stats, spec));
    state.SetLabel(name);
}
BENCHMARK(BM_Attribute)->DenseRange(0, 6)->Unit(benchmark::kMillisecond);

void BM_PatchSensitivity(benchmark::State& state) {
    const auto& f = icnn();
    const auto map = attribute(f.net, f.x, f.stats, {method::GradTimesInput{}, {}});
    const auto trials = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(patch_sensitivity(f.net, f.x, f.stats, map.values, kDefaultFractions, trials, 1));
    }
}
BENCHMARK(BM_PatchSensitivity)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_DeletionCurve(benchmark::State& state) {
    const auto& f = icnn();
    const auto map = attribute(f.net, f.x, f.stats, {method::GradTimesInput{}, {}});
    for (auto _ : state) benchmark::DoNotOptimize(deletion_curve(f.net, f.x, f.stats, map.values));
}
BENCHMARK(BM_DeletionCurve)->Unit(benchmark::kMillisecond);

void BM_Process(benchmark::State& state) {
    const auto& f = icnn();
    const auto map = attribute(f.net, f.x, f.stats, {method::GradTimesInput{}, {}});
    const auto channel = channel_contribution(map).values;
    const PipelineConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(process(map.values, channel, cfg));
}
BENCHMARK(BM_Process);

void BM_GenerateDataset(benchmark::State& state) {
    auto cfg = spindle_vs_emg_config(kChannels, 1);
    cfg.subjects = 1;
    cfg.samples_per_class = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}
BENCHMARK(BM_GenerateDataset)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
