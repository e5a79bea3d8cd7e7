#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "eegattr/attribution.hpp"
#include "eegattr/engine.hpp"
#include "eegattr/error.hpp"
#include "eegattr/evaluation.hpp"
#include "eegattr/models.hpp"
#include "eegattr/pipeline.hpp"
#include "eegattr/synth.hpp"
#include "eegattr/train.hpp"
#include "eegattr/weights_io.hpp"
#include "golden_scenario.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace eegattr;
using namespace testing;
namespace fs = std::filesystem;

namespace {

/// Measurements go to `notes`; a failed requirement also clears `pass`.
struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void note(const std::string& text) { notes.push_back(text); }
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back("violated: " + what);
        }
    }
};

std::string num(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double map_sum(const ContributionMap& m) {
    double s = 0.0;
    for (float v : m.values.values()) s += v;
    return s;
}

double logit_gap(const NetworkSpec& net, const Tensor& x, const Tensor& base, const BatchStats& stats,
                 std::size_t c) {
    return static_cast<double>(forward_logit(net, x, stats, c)) - forward_logit(net, base, stats, c);
}

std::vector<Tensor> tensors_of(const Dataset& d) {
    std::vector<Tensor> xs;
    for (const auto& s : d.samples) xs.push_back(s.data);
    return xs;
}

std::vector<std::size_t> labels_of(const Dataset& d) {
    std::vector<std::size_t> ys;
    for (const auto& s : d.samples) ys.push_back(s.label);
    return ys;
}

EegNetOptions small_eegnet_options() {
    EegNetOptions eo;
    eo.f1 = 3;
    eo.depth = 2;
    eo.temporal_kernel = 8;
    eo.separable_kernel = 4;
    eo.pool1 = 2;
    eo.pool2 = 4;
    return eo;
}

InterpretableCnnOptions small_icnn_options() {
    InterpretableCnnOptions io;
    io.kernels = 4;
    io.temporal_kernel = 8;
    return io;
}

/// Builder-initialized weights; batch statistics from 20 random inputs.
BatchStats stats_from_noise(const NetworkSpec& net, std::uint64_t seed) {
    std::vector<Tensor> batch;
    for (std::uint64_t i = 0; i < 20; ++i) batch.push_back(random_tensor({net.channels, net.length}, 1000 * seed + i));
    return compute_batch_stats(net, batch);
}

/// A short run on a small synthetic set, for tests that need trained weights.
struct TrainedIcnn {
    Dataset data;
    NetworkSpec net;
    BatchStats stats;
};

TrainedIcnn trained_icnn() {
    auto cfg = spindle_vs_emg_config({"T3", "CZ", "T4", "PZ"}, 31);
    cfg.length = 128;
    cfg.subjects = 3;
    cfg.samples_per_class = 10;
    auto data = generate_dataset(cfg);
    const auto xs = tensors_of(data);
    const auto ys = labels_of(data);
    InterpretableCnnOptions io;
    io.kernels = 8;
    io.temporal_kernel = 32;
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 10;
    tc.learning_rate = 0.005;
    tc.seed = 32;
    auto net = train(build_interpretable_cnn(4, 128, 2, io, 33), xs, ys, tc).net;
    auto stats = compute_batch_stats(net, xs);
    return {std::move(data), std::move(net), std::move(stats)};
}

Outcome gradient_correctness() {
    Outcome o;
    std::vector<NetworkSpec> nets = {build_eegnet(3, 32, 2, small_eegnet_options(), 1),
                                     build_interpretable_cnn(3, 32, 2, small_icnn_options(), 1)};
    for (auto& net : nets) {
        randomize(net, 11);
        const auto stats = random_stats(net, 12);
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            const Tensor64 x = random_tensor({3, 32}, 300 + s).cast<double>();
            const std::size_t c = s % net.classes;
            const auto g = backward(net, forward(net, x, stats), stats, c, rule::Plain{});
            const auto fd = finite_diff_gradient(net, x, stats, c, 1e-6);
            worst = std::max(worst, relative_error(g, fd));
        }
        o.note(net.name + " max relative error " + num(worst));
        o.require(worst < 1e-4, net.name + " relative error < 1e-4");
    }
    return o;
}

Outcome completeness() {
    Outcome o;
    double ig_worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        for (const auto& net : {build_interpretable_cnn(3, 32, 2, small_icnn_options(), s),
                                build_eegnet(3, 32, 2, small_eegnet_options(), s)}) {
            const auto stats = stats_from_noise(net, s);
            const Tensor x = random_tensor({3, 32}, 70 + s);
            const Tensor base({3, 32});
            const auto m = attribute(net, x, stats, {method::IntegratedGradients{300}, {}});
            const double delta = logit_gap(net, x, base, stats, m.target_class);
            ig_worst = std::max(ig_worst, std::abs(map_sum(m) - delta) / std::max(1.0, std::abs(delta)));
        }
    }
    o.note("IG(300) worst |sum - delta| / max(1,|delta|) " + num(ig_worst));
    o.require(ig_worst <= 1e-3, "IG completeness within 1e-3");

    double dl_worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto net = build_interpretable_cnn(3, 32, 2, small_icnn_options(), s);
        randomize(net, 40 + s);
        const auto stats = random_stats(net, 50 + s);
        const Tensor x = random_tensor({3, 32}, 90 + s);
        const Tensor base = random_tensor({3, 32}, 190 + s, 0.3);
        const auto m = attribute(net, x, stats, {method::DeepLiftRescale{}, base});
        const double delta = logit_gap(net, x, base, stats, m.target_class);
        dl_worst = std::max(dl_worst, std::abs(map_sum(m) - delta) / std::max(1.0, std::abs(delta)));
    }
    o.note("DeepLIFT on ReLU net worst " + num(dl_worst));
    o.require(dl_worst <= 1e-5, "DeepLIFT summation within 1e-5");
    return o;
}

Outcome lrp_equivalence() {
    Outcome o;
    double random_worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto net = build_interpretable_cnn(4, 128, 2, {}, s / 10);
        randomize(net, 500 + s / 10);
        const auto stats = random_stats(net, 600 + s / 10);
        const Tensor x = random_tensor({4, 128}, 700 + s);
        const auto lrp = attribute(net, x, stats, {method::EpsilonLrp{1e-9}, {}});
        const auto gxi = attribute(net, x, stats, {method::GradTimesInput{}, {}});
        random_worst = std::max(random_worst, max_abs_diff(lrp.values, gxi.values));
    }
    const auto t = trained_icnn();
    double trained_worst = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        const auto& xi = t.data.samples[i].data;
        const auto lrp = attribute(t.net, xi, t.stats, {method::EpsilonLrp{1e-9}, {}});
        const auto gxi = attribute(t.net, xi, t.stats, {method::GradTimesInput{}, {}});
        trained_worst = std::max(trained_worst, max_abs_diff(lrp.values, gxi.values));
    }
    o.note("random weights max |diff| " + num(random_worst) + ", trained " + num(trained_worst));
    o.require(random_worst < 1e-5 && trained_worst < 1e-5, "max abs difference < 1e-5");
    return o;
}

Outcome linear_exactness() {
    Outcome o;
    double worst = 0.0;
    std::size_t defined = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto net = make_net("linear", 3, 32, 2, {LayerSpec::dense("fc", 2, false)});
        randomize(net, s);
        const Tensor x = random_tensor({3, 32}, 20 + s);
        for (const auto& spec : {MethodSpec{method::GradTimesInput{}, {}}, MethodSpec{method::IntegratedGradients{}, {}},
                                 MethodSpec{method::DeepLiftRescale{}, {}}, MethodSpec{method::EpsilonLrp{}, {}}}) {
            const auto m = attribute(net, x, {}, spec);
            const auto sens = patch_sensitivity(net, x, {}, m.values, kDefaultFractions, kDefaultTrials, 7 + s);
            for (const auto& r : sens.r) {
                o.require(r.has_value(), spec.name() + " r defined");
                if (!r) continue;
                ++defined;
                worst = std::max(worst, std::abs(*r - 1.0));
            }
        }
    }
    o.note(std::to_string(defined) + " coefficients, max |r - 1| " + num(worst));
    o.require(worst <= 1e-6, "r = 1 within 1e-6");
    return o;
}

Outcome directional_reproduction() {
    Outcome o;
    auto cfg = spindle_vs_emg_config({"FZ", "C3", "CZ", "C4", "T3", "T4", "PZ", "OZ"}, 2024);
    cfg.length = 128;
    cfg.subjects = 6;
    cfg.samples_per_class = 100;
    const auto split = split_leave_one_subject_out(generate_dataset(cfg), 0);
    InterpretableCnnOptions io;
    io.kernels = 8;
    io.temporal_kernel = 32;
    TrainConfig tc;
    tc.epochs = 6;
    tc.batch_size = 32;
    tc.learning_rate = 0.005;
    tc.seed = 2;
    const auto xs = tensors_of(split.train);
    const auto net = train(build_interpretable_cnn(8, 128, 2, io, 1), xs, labels_of(split.train), tc).net;
    const auto stats = compute_batch_stats(net, tensors_of(split.test));

    std::size_t hits = 0;
    for (const auto& s : split.test.samples) hits += predict(net, s.data, stats).label == s.label;
    const double accuracy = static_cast<double>(hits) / static_cast<double>(split.test.samples.size());
    o.note("test accuracy " + num(accuracy) + " on " + std::to_string(split.test.samples.size()) + " samples");
    o.require(accuracy >= 0.85, "test accuracy >= 0.85");
    o.require(split.test.samples.size() >= 200, ">= 200 test samples");

    MetricConfig metrics;
    metrics.seed = 3;
    std::vector<SampleEvaluation> results;
    for (const auto& s : split.test.samples) {
        for (const auto& name : method_names()) {
            const auto map = attribute(net, s.data, stats, method_from_name(name));
            results.push_back(evaluate_map(net, s.data, stats, map, metrics, s.id));
        }
        auto noise = random_baseline_map(net.channels, net.length, derive_seed(4, {s.id}));
        noise.target_class = predict(net, s.data, stats).label;
        results.push_back(evaluate_map(net, s.data, stats, noise, metrics, s.id));
    }
    const auto summary = aggregate(results);
    const MethodSummary* random = nullptr;
    for (const auto& m : summary.methods) {
        if (m.method == "random") random = &m;
    }
    if (!random) {
        o.require(false, "random baseline present");
        return o;
    }
    o.note("random median r " + num(random->r_all.median) + ", mean AUPC " + num(random->aupc.mean));
    for (const auto& m : summary.methods) {
        o.require(m.r_all.min >= -1.0 && m.r_all.max <= 1.0, m.method + " r in [-1, 1]");
        if (m.method != "grad_x_input" && m.method != "integrated_gradients" && m.method != "deeplift" &&
            m.method != "epsilon_lrp") {
            continue;
        }
        o.note(m.method + " median r " + num(m.r_all.median) + ", mean AUPC " + num(m.aupc.mean));
        o.require(m.r_all.median - random->r_all.median >= 0.2, m.method + " median r exceeds random by 0.2");
        o.require(m.aupc.mean < random->aupc.mean, m.method + " mean AUPC below random");
    }
    return o;
}

Outcome pipeline_golden() {
    Outcome o;
    auto row = [](std::vector<float> v) {
        const std::size_t n = v.size();
        return Tensor({1, n}, std::move(v));
    };
    const auto z = normalize(row({1, 2, 3})).values;
    const double expect = 1.0 / std::sqrt(2.0 / 3.0);
    o.require(std::abs(z[0] + expect) < 1e-6 && std::abs(z[1]) < 1e-6 && std::abs(z[2] - expect) < 1e-6 &&
                  std::abs(z[2] - 1.2247) < 5e-5,
              "normalize [1,2,3]");
    const auto t = apply_threshold(row({-1.2f, 0.0f, 1.2f}), 0.5);
    o.require(t[0] == -1.0f && t[1] == -0.5f && std::abs(t[2] - 0.7) < 1e-6, "threshold example");
    const auto sm = smooth(row({0, 3, 0, 3, 0}), 3);
    o.require(sm == row({1.5f, 1.0f, 2.0f, 1.0f, 1.5f}), "smooth example");

    const auto golden = slurp(fs::path(EEGATTR_TEST_DIR) / "golden" / "report.txt");
    o.require(!golden.empty() && golden_report_text() == golden, "report text matches golden file");

    std::ifstream in(fs::path(EEGATTR_DATA_DIR) / "demo_config.json");
    const auto demo = nlohmann::json::parse(in);
    const auto& p = demo.at("pipeline");
    o.require(p.at("smoothing_window") == 5 && p.at("sample_threshold") == 2.0 && p.at("channel_threshold") == 1.0,
              "demo config ships window 5 and thresholds 2 / 1");
    const PipelineConfig defaults;
    o.require(defaults.smoothing_window == 5 && defaults.sample_threshold == 2.0 && defaults.channel_threshold == 1.0,
              "library defaults are window 5 and thresholds 2 / 1");
    o.note("worked examples, golden report (" + std::to_string(golden.size()) + " bytes), demo defaults");
    return o;
}

/// Flips one random bit after the header lines 100 times; counts ChecksumError.
template <class Load>
std::size_t detected_flips(const fs::path& clean_path, const fs::path& scratch, std::uint64_t seed, Load load) {
    const auto clean = slurp(clean_path);
    const std::size_t blob = clean.find('\n', clean.find('\n') + 1) + 1;
    CounterRng rng(seed);
    std::size_t detected = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto bad = clean;
        const std::size_t byte = blob + rng.below(clean.size() - blob);
        bad[byte] = static_cast<char>(bad[byte] ^ (1 << rng.below(8)));
        std::ofstream(scratch, std::ios::binary) << bad;
        try {
            load(scratch);
        } catch (const ChecksumError&) {
            ++detected;
        } catch (const Error&) {
        }
    }
    return detected;
}

Outcome round_trip() {
    Outcome o;
    const auto dir = temp_dir("acceptance_io");
    for (const std::string arch : {"eegnet", "interpretable_cnn"}) {
        auto net = arch == "eegnet" ? build_eegnet(8, 128, 2, {}, 1) : build_interpretable_cnn(8, 128, 2, {}, 1);
        randomize(net, 21);
        const auto path = dir / (arch + ".weights");
        save_weights(net, path);
        const auto back = load_weights(path);
        bool same = back.layers.size() == net.layers.size();
        for (std::size_t l = 0; same && l < net.layers.size(); ++l) {
            same = back.layers[l].params.size() == net.layers[l].params.size();
            for (std::size_t p = 0; same && p < net.layers[l].params.size(); ++p) {
                const auto& a = net.layers[l].params[p];
                const auto& b = back.layers[l].params[p];
                same = a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
            }
        }
        o.require(same, arch + " weights bit-exact");
        const auto flips = detected_flips(path, dir / "bad.weights", 5, [](const fs::path& p) { load_weights(p); });
        o.note(arch + " weights: " + std::to_string(flips) + "/100 flips detected");
        o.require(flips == 100, arch + " weights flips detected 100/100");
    }

    auto cfg = spindle_vs_emg_config({"T3", "CZ", "T4", "PZ"}, 8);
    cfg.length = 128;
    cfg.subjects = 2;
    cfg.samples_per_class = 10;
    const auto data = generate_dataset(cfg);
    save_dataset(data, dir / "d.eegd");
    const auto back = load_dataset(dir / "d.eegd");
    bool same = back.samples.size() == data.samples.size() && back.channel_names == data.channel_names &&
                back.class_names == data.class_names && back.rate == data.rate;
    for (std::size_t i = 0; same && i < data.samples.size(); ++i) {
        const auto& a = data.samples[i];
        const auto& b = back.samples[i];
        same = a.label == b.label && a.subject == b.subject && a.id == b.id &&
               std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
    }
    o.require(same, "dataset bit-exact");
    const auto flips = detected_flips(dir / "d.eegd", dir / "bad.eegd", 6, [](const fs::path& p) { load_dataset(p); });
    o.note("dataset: " + std::to_string(flips) + "/100 flips detected");
    o.require(flips == 100, "dataset flips detected 100/100");
    return o;
}

Outcome parallel_determinism() {
    Outcome o;
    const fs::path exe = EEGATTR_CLI_PATH;
    const std::string cfg = (fs::path(EEGATTR_DATA_DIR) / "demo_config.json").string();
    const auto dir = temp_dir("acceptance_jobs");
    auto run = [&](const std::vector<std::string>& args) {
        const auto r = run_cli(exe, dir, args);
        o.require(r.code == 0, args[0] + " exit 0 (" + r.err + ")");
        return r.code == 0;
    };
    if (!run({"synth", "--config", cfg, "--dataset", "d.eegd"})) return o;
    if (!run({"train", "--config", cfg, "--dataset", "d.eegd", "--weights", "w.bin"})) return o;
    for (const char* jobs : {"1", "8"}) {
        if (!run({"evaluate", "--config", cfg, "--dataset", "d.eegd", "--weights", "w.bin", "--trials", "20",
                  "--jobs", jobs, "--output", std::string("jobs") + jobs})) {
            return o;
        }
    }
    std::string diff;
    o.require(same_tree(dir / "jobs1", dir / "jobs8", &diff), "identical files (first difference: " + diff + ")");
    o.note("records.jsonl " + std::to_string(slurp(dir / "jobs1" / "records.jsonl").size()) +
           " bytes, summary.txt and summary.json compared");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"IG completeness and DeepLIFT summation", completeness},
        {"epsilon-LRP equals gradient x input", lrp_equivalence},
        {"linear-model exactness", linear_exactness},
        {"directional reproduction at desk scale", directional_reproduction},
        {"pipeline golden tests", pipeline_golden},
        {"round-trip fidelity", round_trip},
        {"determinism under parallelism", parallel_determinism},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string notes;
        for (const auto& n : o.notes) notes += (notes.empty() ? "" : "; ") + n;
        std::printf("criterion %d %s: %s (%.1fs) %s\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    secs, notes.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
