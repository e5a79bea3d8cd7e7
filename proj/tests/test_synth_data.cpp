#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "eegattr/error.hpp"
#include "eegattr/layout.hpp"
#include "eegattr/synth.hpp"
#include "eegattr/train.hpp"
#include "support.hpp"

using namespace eegattr;
using namespace testing;

namespace {

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream(path, std::ios::binary) << bytes;
}

/// Mean periodogram power in [lo, hi] Hz of one row, by direct DFT.
double band_power(const Tensor& x, std::size_t ch, double rate, double lo, double hi) {
    const std::size_t t = x.dim(1);
    double power = 0.0;
    std::size_t bins = 0;
    for (std::size_t k = 1; k < t / 2; ++k) {
        const double f = static_cast<double>(k) * rate / static_cast<double>(t);
        if (f < lo || f > hi) continue;
        double re = 0.0, im = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
            const double phase = 2.0 * std::numbers::pi * static_cast<double>(k * j) / static_cast<double>(t);
            re += x.at(ch, j) * std::cos(phase);
            im -= x.at(ch, j) * std::sin(phase);
        }
        power += (re * re + im * im) / static_cast<double>(t);
        ++bins;
    }
    return power / static_cast<double>(bins);
}

SynthConfig single_feature(FeatureSpec feature) {
    SynthConfig cfg;
    cfg.channel_names = {"FP1", "FP2", "FZ", "CZ"};
    cfg.length = 128;
    cfg.background_amplitude = 0.0;
    cfg.samples_per_class = 2;
    cfg.subjects = 1;
    cfg.classes = {{"feature", {std::move(feature)}}, {"empty", {}}};
    return cfg;
}

double accuracy(const NetworkSpec& net, const BatchStats& stats, const Dataset& test) {
    std::size_t hits = 0;
    for (const auto& s : test.samples) hits += predict(net, s.data, stats).label == s.label;
    return static_cast<double>(hits) / static_cast<double>(test.samples.size());
}

double loso_accuracy(const SynthConfig& cfg) {
    const auto data = generate_dataset(cfg);
    const auto split = split_leave_one_subject_out(data, 0);
    std::vector<Tensor> xs;
    std::vector<std::size_t> ys;
    for (const auto& s : split.train.samples) {
        xs.push_back(s.data);
        ys.push_back(s.label);
    }
    InterpretableCnnOptions opt;
    opt.kernels = 4;
    opt.temporal_kernel = 16;
    TrainConfig tc;
    tc.epochs = 6;
    tc.batch_size = 20;
    tc.learning_rate = 0.01;
    tc.seed = 3;
    const auto net = train(build_interpretable_cnn(cfg.channel_names.size(), cfg.length, 2, opt, 2), xs, ys, tc).net;
    return accuracy(net, compute_batch_stats(net, xs), split.test);
}

}  // namespace

TEST_SUITE("synth-data") {
    TEST_CASE("dataset size and balance") {
        const auto cfg = spindle_vs_emg_config(default_layout().names(), 1);
        CHECK(cfg.subjects == 11);
        CHECK(cfg.samples_per_class == 50);
        CHECK(cfg.length == 384);
        CHECK(cfg.rate == 128.0);
        const auto data = generate_dataset(cfg);
        REQUIRE(data.samples.size() == 1100);
        CHECK(data.channels == 30);
        CHECK(data.class_names == std::vector<std::string>{"alert", "drowsy"});
        std::map<std::size_t, std::array<std::size_t, 2>> per_subject;
        std::set<std::size_t> ids;
        for (const auto& s : data.samples) {
            ++per_subject[s.subject][s.label];
            ids.insert(s.id);
            CHECK(s.data.all_finite());
        }
        CHECK(ids.size() == 1100);
        CHECK(per_subject.size() == 11);
        for (const auto& [subject, counts] : per_subject) {
            CHECK(counts[0] == 50);
            CHECK(counts[1] == 50);
        }
    }

    TEST_CASE("generation is a pure function of the config") {
        auto cfg = spindle_vs_emg_config({"T3", "CZ", "T4", "PZ"}, 9);
        cfg.subjects = 2;
        cfg.samples_per_class = 3;
        const auto dir = temp_dir("synth_det");
        save_dataset(generate_dataset(cfg), dir / "a.eegd");
        save_dataset(generate_dataset(cfg), dir / "b.eegd");
        CHECK(read_bytes(dir / "a.eegd") == read_bytes(dir / "b.eegd"));
        cfg.seed = 10;
        save_dataset(generate_dataset(cfg), dir / "c.eegd");
        CHECK_FALSE(read_bytes(dir / "a.eegd") == read_bytes(dir / "c.eegd"));
    }

    TEST_CASE("feature validation") {
        auto cfg = spindle_vs_emg_config({"T3", "PZ"}, 1);
        auto nyquist = cfg;
        nyquist.classes[1].features[0].freq_high = 64.0;
        CHECK_THROWS_AS((void)generate_dataset(nyquist), ValidationError);
        auto too_long = cfg;
        too_long.classes[1].features[0].duration = 4.0;
        CHECK_THROWS_AS((void)generate_dataset(too_long), ValidationError);
        auto unknown = cfg;
        unknown.classes[1].features[0].channels = {"XX"};
        CHECK_THROWS_AS((void)generate_dataset(unknown), ValidationError);
        auto one_class = cfg;
        one_class.classes.pop_back();
        CHECK_THROWS_AS((void)generate_dataset(one_class), ValidationError);

        for (auto kind : {FeatureKind::AlphaSpindle, FeatureKind::BlinkPulse, FeatureKind::EmgNoise,
                          FeatureKind::FrnTransient, FeatureKind::PinkBackground}) {
            CHECK(feature_kind_from_string(to_string(kind)) == kind);
        }
        CHECK_THROWS_AS((void)feature_kind_from_string("gamma_burst"), ValidationError);
    }

    TEST_CASE("spindle class carries an alpha-band bump") {
        auto cfg = spindle_vs_emg_config({"T3", "CZ", "T4", "PZ", "OZ"}, 4);
        cfg.subjects = 2;
        cfg.samples_per_class = 20;
        const auto data = generate_dataset(cfg);
        const std::size_t pz = 3;
        const std::size_t cz = 1;
        double drowsy_pz = 0.0, alert_pz = 0.0, drowsy_cz = 0.0;
        for (const auto& s : data.samples) {
            const double p = band_power(s.data, pz, data.rate, 8.0, 13.0);
            if (s.label == 1) {
                drowsy_pz += p;
                drowsy_cz += band_power(s.data, cz, data.rate, 8.0, 13.0);
            } else {
                alert_pz += p;
            }
        }
        CHECK(10.0 * std::log10(drowsy_pz / alert_pz) > 3.0);
        CHECK(10.0 * std::log10(drowsy_pz / drowsy_cz) > 3.0);
    }

    TEST_CASE("blink and FRN waveforms") {
        auto blink = FeatureSpec::defaults(FeatureKind::BlinkPulse);
        CHECK(blink.channels == std::vector<std::string>{"FP1", "FP2"});
        blink.latency = 0.5;
        const auto b = generate_dataset(single_feature(blink));
        const auto& x = b.samples[0].data;
        const std::size_t onset = 64;
        const std::size_t span = static_cast<std::size_t>(std::lround(0.3 * 128.0));
        for (std::size_t j = 0; j < 128; ++j) {
            CHECK(x.at(2, j) == 0.0f);
            CHECK(x.at(3, j) == 0.0f);
            if (j < onset || j >= onset + span) CHECK(x.at(0, j) == 0.0f);
        }
        CHECK(x.at(0, onset + span / 4) > 0.0f);
        CHECK(x.at(0, onset + 3 * span / 4) < 0.0f);
        for (std::size_t j = 0; j < 128; ++j) CHECK(std::abs(x.at(0, j)) <= 4.0 * 1.2 + 1e-5);
        for (float v : b.samples[1].data.values()) CHECK(v == 0.0f);

        auto frn = FeatureSpec::defaults(FeatureKind::FrnTransient);
        frn.channels = {"FZ"};
        const auto f = generate_dataset(single_feature(frn));
        const auto& y = f.samples[0].data;
        const std::size_t at = 32;  // 0.25 s at 128 Hz
        for (std::size_t j = 0; j < at; ++j) CHECK(y.at(2, j) == 0.0f);
        CHECK(y.at(2, at + span / 4) < 0.0f);
        CHECK(y.at(2, at + 3 * span / 4) > 0.0f);
    }

    TEST_CASE("zero-amplitude features give indistinguishable classes") {
        auto cfg = spindle_vs_emg_config({"T3", "CZ", "T4", "PZ"}, 21);
        cfg.length = 128;
        cfg.subjects = 5;
        cfg.samples_per_class = 100;
        auto null_cfg = cfg;
        for (auto& c : null_cfg.classes) {
            for (auto& f : c.features) f.amplitude = 0.0;
        }
        const double null_acc = loso_accuracy(null_cfg);
        CHECK(null_acc >= 0.4);
        CHECK(null_acc <= 0.6);
        CHECK(loso_accuracy(cfg) >= 0.85);
    }

    TEST_CASE("leave-one-subject-out partitions") {
        auto cfg = spindle_vs_emg_config({"T3", "PZ"}, 5);
        cfg.length = 128;
        cfg.samples_per_class = 2;
        const auto data = generate_dataset(cfg);
        CHECK(data.subject_ids().size() == 11);
        std::map<std::size_t, std::size_t> tested;
        for (const auto subject : data.subject_ids()) {
            const auto split = split_leave_one_subject_out(data, subject);
            std::set<std::size_t> train_subjects, ids;
            for (const auto& s : split.train.samples) {
                train_subjects.insert(s.subject);
                ids.insert(s.id);
            }
            for (const auto& s : split.test.samples) {
                CHECK(s.subject == subject);
                CHECK(ids.insert(s.id).second);
                ++tested[s.id];
            }
            CHECK(train_subjects.size() == 10);
            CHECK(train_subjects.count(subject) == 0);
            CHECK(ids.size() == data.samples.size());
        }
        CHECK(tested.size() == data.samples.size());
        for (const auto& [id, n] : tested) CHECK(n == 1);
        CHECK_THROWS_AS((void)split_leave_one_subject_out(data, 11), ValidationError);
    }

    TEST_CASE("dataset round trip on 1000 samples") {
        auto cfg = spindle_vs_emg_config({"T3", "CZ", "T4", "PZ"}, 6);
        cfg.length = 64;
        cfg.classes[0].features[0].duration = 0.5;
        cfg.classes[1].features[0].duration = 0.5;
        cfg.subjects = 10;
        const auto data = generate_dataset(cfg);
        REQUIRE(data.samples.size() == 1000);
        const auto dir = temp_dir("synth_rt");
        save_dataset(data, dir / "d.eegd");
        const auto back = load_dataset(dir / "d.eegd");
        CHECK(back.channel_names == data.channel_names);
        CHECK(back.class_names == data.class_names);
        CHECK(back.rate == data.rate);
        REQUIRE(back.samples.size() == 1000);
        for (std::size_t i = 0; i < 1000; ++i) {
            const auto& a = data.samples[i];
            const auto& b = back.samples[i];
            CHECK(a.label == b.label);
            CHECK(a.subject == b.subject);
            CHECK(a.id == b.id);
            CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
        }
    }

    TEST_CASE("dataset corruption is detected") {
        auto cfg = spindle_vs_emg_config({"T3", "PZ"}, 7);
        cfg.length = 128;
        cfg.subjects = 2;
        cfg.samples_per_class = 2;
        const auto dir = temp_dir("synth_fuzz");
        save_dataset(generate_dataset(cfg), dir / "d.eegd");
        const auto clean = read_bytes(dir / "d.eegd");
        const std::size_t blob = clean.find('\n', clean.find('\n') + 1) + 1;
        REQUIRE(blob < clean.size());
        CounterRng rng(8);
        for (int trial = 0; trial < 100; ++trial) {
            auto bad = clean;
            const std::size_t byte = blob + rng.below(clean.size() - blob);
            bad[byte] = static_cast<char>(bad[byte] ^ (1 << rng.below(8)));
            write_bytes(dir / "bad.eegd", bad);
            CHECK_THROWS_AS((void)load_dataset(dir / "bad.eegd"), ChecksumError);
        }
        write_bytes(dir / "bad.eegd", clean.substr(0, clean.size() - 4));
        CHECK_THROWS_AS((void)load_dataset(dir / "bad.eegd"), FormatError);
        write_bytes(dir / "bad.eegd", "NOT-A-DATASET\n{}\n");
        CHECK_THROWS_AS((void)load_dataset(dir / "bad.eegd"), FormatError);
    }

    TEST_CASE("layout parsing") {
        const auto l = parse_layout("# montage\nCZ 0.0 0.0\n\nFZ 0 0.4  # front\n");
        REQUIRE(l.size() == 2);
        CHECK(l.electrodes[0].name == "CZ");
        CHECK(l.electrodes[0].x == 0.0);
        CHECK(l.electrodes[0].y == 0.0);
        CHECK(l.index_of("FZ") == 1);
        CHECK_THROWS_AS((void)l.index_of("PZ"), ValidationError);
        CHECK_THROWS_AS((void)parse_layout("CZ 1.5 0\n"), CoordinateError);
        CHECK_THROWS_AS((void)parse_layout("CZ 0.8 0.8\n"), CoordinateError);
        try {
            (void)parse_layout("CZ 0 0\nPZ zero 0\n", "test.txt");
            FAIL("expected FormatError");
        } catch (const CoordinateError&) {
            FAIL("malformed line is not a coordinate error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("test.txt:2") != std::string::npos);
        }
        CHECK_THROWS_AS((void)parse_layout("CZ 0 0\nCZ 0.1 0\n"), FormatError);
        CHECK_THROWS_AS((void)parse_layout("# nothing\n"), FormatError);
        const auto sub = default_layout().subset({"OZ", "FZ"});
        CHECK(sub.names() == std::vector<std::string>{"OZ", "FZ"});
    }

    TEST_CASE("bundled layout") {
        const auto& l = default_layout();
        REQUIRE(l.size() == 30);
        CHECK(read_bytes(std::string(EEGATTR_DATA_DIR) + "/layout_30ch.txt") == std::string(default_layout_text()));
        const auto file = load_layout(std::string(EEGATTR_DATA_DIR) + "/layout_30ch.txt");
        CHECK(file.names() == l.names());
        std::set<std::string> names;
        for (const auto& e : l.electrodes) {
            CHECK(e.x * e.x + e.y * e.y <= 1.0);
            names.insert(e.name);
        }
        CHECK(names.size() == 30);
        const auto& cz = l.electrodes[l.index_of("CZ")];
        CHECK(cz.x == 0.0);
        CHECK(cz.y == 0.0);
        CHECK(l.electrodes[l.index_of("FZ")].y > 0.0);
        CHECK(l.electrodes[l.index_of("OZ")].y < 0.0);
        const auto& c3 = l.electrodes[l.index_of("C3")];
        const auto& c4 = l.electrodes[l.index_of("C4")];
        CHECK(c3.x == doctest::Approx(-c4.x));
        CHECK(c3.y == doctest::Approx(c4.y));
    }
}
