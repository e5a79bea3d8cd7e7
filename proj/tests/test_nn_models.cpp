#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "eegattr/error.hpp"
#include "eegattr/models.hpp"
#include "eegattr/train.hpp"
#include "eegattr/weights_io.hpp"
#include "support.hpp"

using namespace eegattr;
using namespace testing;

namespace {

double prob_sum(const Tensor& p) {
    double s = 0.0;
    for (float v : p.values()) s += v;
    return s;
}

void zero_weights(NetworkSpec& net) {
    for (auto& l : net.layers) {
        const auto names = l.param_names();
        for (std::size_t p = 0; p < l.params.size(); ++p) {
            if (names[p] != "gamma") l.params[p].fill(0.0f);
        }
    }
}

// Two Gaussian blobs separated along a fixed direction.
void separable_set(std::size_t count, std::uint64_t seed, std::vector<Tensor>& xs, std::vector<std::size_t>& ys) {
    CounterRng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t y = i % 2;
        Tensor x({2, 4});
        for (std::size_t j = 0; j < x.size(); ++j) {
            x[j] = static_cast<float>(0.5 * rng.normal() + (y ? 1.0 : -1.0) * (j % 3 == 0 ? 1.0 : 0.0));
        }
        xs.push_back(std::move(x));
        ys.push_back(y);
    }
}

NetworkSpec dense_net(std::uint64_t seed) {
    auto net = make_net("dense_only", 2, 4, 2, {LayerSpec::dense("fc", 2), LayerSpec::softmax("softmax")});
    initialize_parameters(net, seed);
    return net;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

}  // namespace

TEST_SUITE("nn-models") {
    TEST_CASE("EEGNet layer order and nonlinearity sites") {
        const auto net = build_eegnet(30, 384, 2);
        std::vector<LayerKind> kinds;
        for (const auto& l : net.layers) kinds.push_back(l.kind);
        const std::vector<LayerKind> expected = {
            LayerKind::Conv2d,  LayerKind::BatchNorm,     LayerKind::Elu,       LayerKind::DepthwiseConv,
            LayerKind::BatchNorm, LayerKind::Elu,         LayerKind::AvgPool,   LayerKind::Dropout,
            LayerKind::SeparableConv, LayerKind::BatchNorm, LayerKind::Elu,     LayerKind::AvgPool,
            LayerKind::Dropout, LayerKind::Dense,         LayerKind::Softmax};
        CHECK(kinds == expected);
        CHECK(net.nonlinearity_count() == 3);
        CHECK(net.batch_norm_count() == 3);
        CHECK(net.layers[0].out_channels == 8);
        CHECK(net.layers[0].kernel_w == 64);
        CHECK(net.layers[3].depth_multiplier == 2);
        CHECK(net.layers[3].kernel_h == 30);
        CHECK(net.layers[8].out_channels == 16);
        CHECK(net.layers[8].kernel_w == 16);
        CHECK(net.layers[6].pool_w == 4);
        CHECK(net.layers[11].pool_w == 8);
        CHECK(net.layers[7].rate == doctest::Approx(0.25));
    }

    TEST_CASE("EEGNet forward on the dataset shapes") {
        for (auto [n, t, k] : {std::array<std::size_t, 3>{22, 254, 4}, std::array<std::size_t, 3>{30, 384, 2}}) {
            const auto net = build_eegnet(n, t, k, {}, 7);
            const auto stats = random_stats(net, 1);
            const auto trace = forward(net, random_tensor({n, t}, 3), stats);
            CHECK(trace.probabilities.size() == k);
            CHECK(prob_sum(trace.probabilities) == doctest::Approx(1.0).epsilon(1e-6));
        }
    }

    TEST_CASE("EEGNet rejects inputs too short for the pooling chain") {
        EegNetOptions opt;
        opt.temporal_kernel = 8;
        CHECK(eegnet_min_length(opt) == 32);
        try {
            (void)build_eegnet(4, 31, 2, opt);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("32") != std::string::npos);
        }
        CHECK_NOTHROW((void)build_eegnet(4, 32, 2, opt));
    }

    TEST_CASE("zero-weight networks give uniform probabilities") {
        auto eeg = build_eegnet(4, 64, 4);
        zero_weights(eeg);
        auto icnn = build_interpretable_cnn(4, 64, 4);
        zero_weights(icnn);
        for (auto* net : {&eeg, &icnn}) {
            const auto stats = random_stats(*net, 2);
            const auto pred = predict(*net, random_tensor({4, 64}, 5), stats);
            CHECK(pred.label == 0);
            for (float p : pred.probabilities.values()) CHECK(p == doctest::Approx(0.25).epsilon(1e-7));
        }
    }

    TEST_CASE("InterpretableCNN structure") {
        const auto net = build_interpretable_cnn(30, 384, 2);
        REQUIRE(net.layers.size() == 7);
        CHECK(net.layers[0].kind == LayerKind::Conv2d);
        CHECK(net.layers[0].out_channels == 16);
        CHECK(net.layers[0].kernel_w == 64);
        CHECK(net.layers[1].kind == LayerKind::DepthwiseConv);
        CHECK(net.layers[1].kernel_h == 30);
        CHECK(net.layers[1].depth_multiplier == 2);
        CHECK(net.layers[2].kind == LayerKind::Relu);
        CHECK(net.layers[3].kind == LayerKind::BatchNorm);
        CHECK(net.layers[4].kind == LayerKind::GlobalAvgPool);
        CHECK(net.layers[5].kind == LayerKind::Dense);
        CHECK(net.layers[6].kind == LayerKind::Softmax);
        CHECK(net.nonlinearity_count() == 1);
    }

    TEST_CASE("InterpretableCNN probabilities sum to one; single channel works") {
        for (std::size_t n : {std::size_t{1}, std::size_t{30}}) {
            auto net = build_interpretable_cnn(n, 384, 2, {}, 4);
            randomize(net, 9);
            const auto stats = random_stats(net, 3);
            for (std::uint64_t s = 0; s < 5; ++s) {
                const auto trace = forward(net, random_tensor({n, 384}, s), stats);
                CHECK(std::abs(prob_sum(trace.probabilities) - 1.0) < 1e-6);
            }
        }
        CHECK_THROWS_AS((void)build_interpretable_cnn(3, 63, 2), ValidationError);
    }

    TEST_CASE("batch statistics") {
        auto net = make_net("bn", 1, 1, 1, {LayerSpec::batch_norm("bn"), LayerSpec::dense("fc", 1)});
        net.layers[0].params[0].fill(1.0f);
        std::vector<Tensor> batch = {Tensor({1, 1}, 0.0f), Tensor({1, 1}, 2.0f)};
        const auto stats = compute_batch_stats(net, batch);
        CHECK(stats.sites[0].mean[0] == 1.0f);
        CHECK(stats.sites[0].std[0] == 1.0f);

        std::vector<Tensor> same(3, Tensor({1, 1}, 4.0f));
        CHECK(compute_batch_stats(net, same).sites[0].std[0] == kStdFloor);
        CHECK_THROWS_AS((void)compute_batch_stats(net, std::vector<Tensor>{}), ValidationError);

        auto eeg = build_eegnet(3, 64, 2, {}, 1);
        std::vector<Tensor> xs;
        for (std::uint64_t s = 0; s < 6; ++s) xs.push_back(random_tensor({3, 64}, s));
        const auto a = compute_batch_stats(eeg, xs);
        std::reverse(xs.begin(), xs.end());
        const auto b = compute_batch_stats(eeg, xs);
        REQUIRE(a.sites.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(max_abs_diff(a.sites[i].mean, b.sites[i].mean) < 1e-6);
            CHECK(max_abs_diff(a.sites[i].std, b.sites[i].std) < 1e-6);
            for (float v : a.sites[i].std.values()) CHECK(v >= kStdFloor);
        }
    }

    TEST_CASE("predict tie rule and wrapper contract") {
        const std::vector<float> tie = {0.5f, 0.5f};
        CHECK(argmax(tie) == 0);
        auto net = build_interpretable_cnn(3, 64, 3, {}, 2);
        const auto stats = random_stats(net, 1);
        const Tensor x = random_tensor({3, 64}, 8);
        const auto pred = predict(net, x, stats);
        CHECK(pred.probabilities == forward(net, x, stats).probabilities);
    }

    TEST_CASE("training defaults") {
        TrainConfig cfg;
        CHECK(cfg.learning_rate == 0.001);
        CHECK(cfg.beta1 == 0.9);
        CHECK(cfg.beta2 == 0.999);
        CHECK(cfg.batch_size == 50);
        CHECK_NOTHROW(cfg.validate(2));
        cfg.class_weights = {1.0, 0.0};
        CHECK_THROWS_AS(cfg.validate(2), ValidationError);
        cfg.class_weights = {1.0};
        CHECK_THROWS_AS(cfg.validate(2), ValidationError);
    }

    TEST_CASE("dense-only net learns a separable task") {
        std::vector<Tensor> xs;
        std::vector<std::size_t> ys;
        separable_set(200, 3, xs, ys);
        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.batch_size = 20;
        cfg.learning_rate = 0.02;
        cfg.seed = 1;
        const auto result = train(dense_net(1), xs, ys, cfg);
        REQUIRE(result.history.size() == 30);
        CHECK(result.history.back().accuracy >= 0.95);
    }

    TEST_CASE("loss decreases over the first five epochs for ten seeds") {
        std::vector<Tensor> xs;
        std::vector<std::size_t> ys;
        separable_set(100, 5, xs, ys);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            CAPTURE(seed);
            TrainConfig cfg;
            cfg.epochs = 5;
            cfg.batch_size = 10;
            cfg.learning_rate = 0.01;
            cfg.seed = seed;
            const auto result = train(dense_net(seed), xs, ys, cfg);
            for (std::size_t e = 1; e < 5; ++e) CHECK(result.history[e].loss < result.history[e - 1].loss);
        }
    }

    TEST_CASE("unit class weights equal the unweighted loss") {
        std::vector<Tensor> xs;
        std::vector<std::size_t> ys;
        separable_set(30, 8, xs, ys);
        auto net = build_interpretable_cnn(2, 4, 2, {4, 2, 2}, 3);
        const double unweighted = batch_loss(net, xs, ys, {});
        const std::vector<double> ones = {1.0, 1.0};
        CHECK(std::abs(batch_loss(net, xs, ys, ones) - unweighted) < 1e-7);

        TrainConfig a;
        a.epochs = 2;
        a.batch_size = 10;
        a.seed = 4;
        TrainConfig b = a;
        b.class_weights = ones;
        const auto ra = train(net, xs, ys, a);
        const auto rb = train(net, xs, ys, b);
        for (std::size_t e = 0; e < 2; ++e) CHECK(std::abs(ra.history[e].loss - rb.history[e].loss) < 1e-7);
    }

    TEST_CASE("class weights rescale the loss per sample") {
        // Oracle: weighted mean of per-sample cross-entropy computed from forward().
        std::vector<Tensor> xs;
        std::vector<std::size_t> ys;
        separable_set(10, 2, xs, ys);
        const auto net = dense_net(6);
        const std::vector<double> w = {1.0, 0.41};
        double num = 0.0, den = 0.0;
        const BatchStats none;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto trace = forward(net, xs[i].cast<double>(), none);
            num += w[ys[i]] * -std::log(trace.probabilities[ys[i]]);
            den += w[ys[i]];
        }
        CHECK(batch_loss(net, xs, ys, w) == doctest::Approx(num / den).epsilon(1e-6));
    }

    TEST_CASE("zero epochs return the initial network") {
        std::vector<Tensor> xs;
        std::vector<std::size_t> ys;
        separable_set(10, 2, xs, ys);
        const auto net = dense_net(3);
        TrainConfig cfg;
        cfg.epochs = 0;
        const auto result = train(net, xs, ys, cfg);
        CHECK(result.history.empty());
        CHECK(result.net.layers[0].params[0] == net.layers[0].params[0]);
    }

    TEST_CASE("training is deterministic and handles EEGNet dropout") {
        std::vector<Tensor> xs;
        std::vector<std::size_t> ys;
        for (std::uint64_t s = 0; s < 12; ++s) {
            xs.push_back(random_tensor({3, 32}, s));
            ys.push_back(s % 2);
        }
        EegNetOptions opt;
        opt.temporal_kernel = 8;
        opt.separable_kernel = 4;
        const auto net = build_eegnet(3, 32, 2, opt, 2);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 4;
        cfg.seed = 11;
        const auto a = train(net, xs, ys, cfg);
        const auto b = train(net, xs, ys, cfg);
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            for (std::size_t p = 0; p < net.layers[l].params.size(); ++p) {
                CHECK(a.net.layers[l].params[p] == b.net.layers[l].params[p]);
            }
        }
    }

    TEST_CASE("weights round-trip bit-exactly") {
        const auto dir = temp_dir("weights");
        for (const std::string arch : {"eegnet", "interpretable_cnn"}) {
            auto net = arch == "eegnet" ? build_eegnet(4, 64, 3, {}, 1) : build_interpretable_cnn(4, 64, 3, {}, 1);
            randomize(net, 21);
            const auto path = dir / (arch + ".weights");
            save_weights(net, path);
            const auto loaded = load_weights(path);
            REQUIRE(loaded.layers.size() == net.layers.size());
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                for (std::size_t p = 0; p < net.layers[l].params.size(); ++p) {
                    CHECK(std::memcmp(loaded.layers[l].params[p].data(), net.layers[l].params[p].data(),
                                      net.layers[l].params[p].size() * sizeof(float)) == 0);
                }
            }
            const auto stats = random_stats(net, 2);
            for (std::uint64_t s = 0; s < 100; ++s) {
                const Tensor x = random_tensor({4, 64}, s);
                CHECK(forward(loaded, x, stats).probabilities == forward(net, x, stats).probabilities);
            }
        }
    }

    TEST_CASE("weight file corruption is detected with distinct errors") {
        const auto dir = temp_dir("weights_bad");
        auto net = build_interpretable_cnn(4, 64, 2, {}, 1);
        const auto path = dir / "net.weights";
        save_weights(net, path);
        const std::string bytes = read_file(path);

        write_file(dir / "trunc.weights", bytes.substr(0, bytes.size() - 7));
        CHECK_THROWS_AS((void)load_weights(dir / "trunc.weights"), ChecksumError);

        std::string edited = bytes;
        const auto pos = edited.find("\"channels\":4");
        REQUIRE(pos != std::string::npos);
        edited.replace(pos, 12, "\"channels\":5");
        write_file(dir / "edited.weights", edited);
        CHECK_THROWS_AS((void)load_weights(dir / "edited.weights"), ShapeMismatchError);

        std::string version = bytes;
        const auto vpos = version.find("\"version\":1");
        REQUIRE(vpos != std::string::npos);
        version.replace(vpos, 11, "\"version\":9");
        write_file(dir / "version.weights", version);
        CHECK_THROWS_AS((void)load_weights(dir / "version.weights"), VersionError);

        write_file(dir / "header.weights", "NOT-A-WEIGHT-FILE\n" + bytes);
        try {
            (void)load_weights(dir / "header.weights");
            FAIL("expected FormatError");
        } catch (const ChecksumError&) {
            FAIL("header corruption misreported as checksum");
        } catch (const FormatError&) {
        }
    }
}
