#include "eegattr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "container.hpp"
#include "eegattr/error.hpp"
#include "eegattr/rng.hpp"

namespace eegattr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const std::string kDatasetMagic = "EEGATTR-DATASET";

// Kellet's economy pink-noise filter over white normal noise, scaled to unit
// standard deviation over the returned span.
std::vector<double> pink_noise(std::size_t length, CounterRng& rng) {
    constexpr std::size_t kWarmup = 512;
    std::array<double, 7> b{};
    std::vector<double> out(length);
    for (std::size_t i = 0; i < kWarmup + length; ++i) {
        const double w = rng.normal();
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        const double p = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
        b[6] = w * 0.115926;
        if (i >= kWarmup) out[i - kWarmup] = p;
    }
    double mean = 0.0;
    for (double v : out) mean += v;
    mean /= static_cast<double>(length);
    double ss = 0.0;
    for (double v : out) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(length));
    for (double& v : out) v = sd > 0.0 ? (v - mean) / sd : 0.0;
    return out;
}

double hann(double u) { return 0.5 - 0.5 * std::cos(kTwoPi * u); }

std::vector<std::size_t> target_channels(const FeatureSpec& f, const std::vector<std::string>& names) {
    std::vector<std::size_t> out;
    if (f.channels.empty()) {
        for (std::size_t i = 0; i < names.size(); ++i) out.push_back(i);
        return out;
    }
    for (const auto& c : f.channels) {
        out.push_back(static_cast<std::size_t>(std::find(names.begin(), names.end(), c) - names.begin()));
    }
    return out;
}

// Adds one episode of the feature to `x` (N x T, row-major).
void inject(const FeatureSpec& f, const SynthConfig& cfg, double gain, CounterRng& rng, std::vector<double>& x) {
    const std::size_t t = cfg.length;
    const auto channels = target_channels(f, cfg.channel_names);
    if (f.kind == FeatureKind::PinkBackground) {
        for (const std::size_t ch : channels) {
            const auto noise = pink_noise(t, rng);
            for (std::size_t j = 0; j < t; ++j) x[ch * t + j] += gain * f.amplitude * noise[j];
        }
        return;
    }

    const auto span = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(f.duration * cfg.rate)));
    std::size_t onset = 0;
    if (f.latency >= 0.0) {
        onset = static_cast<std::size_t>(std::lround(f.latency * cfg.rate));
    } else {
        onset = rng.below(t - span + 1);
    }
    onset = std::min(onset, t - span);

    std::vector<double> wave(span, 0.0);
    switch (f.kind) {
        case FeatureKind::AlphaSpindle: {
            const double freq = f.freq_low + (f.freq_high - f.freq_low) * rng.uniform();
            const double phase = kTwoPi * rng.uniform();
            for (std::size_t j = 0; j < span; ++j) {
                const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(span);
                wave[j] = hann(u) * std::sin(kTwoPi * freq * static_cast<double>(j) / cfg.rate + phase);
            }
            break;
        }
        case FeatureKind::EmgNoise: {
            constexpr int kComponents = 16;
            for (int k = 0; k < kComponents; ++k) {
                const double freq = f.freq_low + (f.freq_high - f.freq_low) * rng.uniform();
                const double phase = kTwoPi * rng.uniform();
                for (std::size_t j = 0; j < span; ++j) {
                    wave[j] += std::sin(kTwoPi * freq * static_cast<double>(j) / cfg.rate + phase);
                }
            }
            const double norm = std::sqrt(2.0 / kComponents);
            for (std::size_t j = 0; j < span; ++j) {
                const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(span);
                wave[j] *= norm * hann(u);
            }
            break;
        }
        case FeatureKind::BlinkPulse:
        case FeatureKind::FrnTransient: {
            const double sign = f.kind == FeatureKind::BlinkPulse ? 1.0 : -1.0;
            for (std::size_t j = 0; j < span; ++j) {
                const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(span);
                wave[j] = sign * std::sin(kTwoPi * u);
            }
            break;
        }
        case FeatureKind::PinkBackground:
            break;
    }
    for (const std::size_t ch : channels) {
        const double channel_gain = 0.75 + 0.25 * rng.uniform();
        for (std::size_t j = 0; j < span; ++j) {
            x[ch * t + onset + j] += gain * channel_gain * f.amplitude * wave[j];
        }
    }
}

}  // namespace

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::AlphaSpindle: return "alpha_spindle";
        case FeatureKind::BlinkPulse: return "blink_pulse";
        case FeatureKind::EmgNoise: return "emg_noise";
        case FeatureKind::FrnTransient: return "frn_transient";
        case FeatureKind::PinkBackground: return "pink_background";
    }
    return "?";
}

FeatureKind feature_kind_from_string(std::string_view name) {
    for (auto k : {FeatureKind::AlphaSpindle, FeatureKind::BlinkPulse, FeatureKind::EmgNoise,
                   FeatureKind::FrnTransient, FeatureKind::PinkBackground}) {
        if (to_string(k) == name) return k;
    }
    throw ValidationError("unknown feature kind '" + std::string(name) +
                          "'; expected one of: alpha_spindle, blink_pulse, emg_noise, frn_transient, pink_background");
}

FeatureSpec FeatureSpec::defaults(FeatureKind kind) {
    FeatureSpec f;
    f.kind = kind;
    switch (kind) {
        case FeatureKind::AlphaSpindle:
            f.amplitude = 2.0;
            f.freq_low = f.freq_high = 10.0;
            f.duration = 1.0;
            break;
        case FeatureKind::BlinkPulse:
            f.amplitude = 4.0;
            f.duration = 0.3;
            f.channels = {"FP1", "FP2"};
            break;
        case FeatureKind::EmgNoise:
            f.amplitude = 1.5;
            f.freq_low = 30.0;
            f.freq_high = 50.0;
            f.duration = 1.0;
            break;
        case FeatureKind::FrnTransient:
            f.amplitude = 3.0;
            f.duration = 0.3;
            f.latency = 0.25;
            break;
        case FeatureKind::PinkBackground:
            f.amplitude = 1.0;
            f.duration = 0.0;
            break;
    }
    return f;
}

void FeatureSpec::validate(double rate, std::size_t length, const std::vector<std::string>& channel_names) const {
    const std::string what = "feature " + to_string(kind);
    if (!std::isfinite(amplitude) || amplitude < 0.0) throw ValidationError(what + ": amplitude must be >= 0");
    for (const auto& c : channels) {
        if (std::find(channel_names.begin(), channel_names.end(), c) == channel_names.end()) {
            throw ValidationError(what + ": unknown channel '" + c + "'");
        }
    }
    if (kind == FeatureKind::PinkBackground) return;
    const double seconds = static_cast<double>(length) / rate;
    if (!(duration > 0.0) || duration > seconds) {
        throw ValidationError(what + ": duration " + std::to_string(duration) + " s must lie in (0, " +
                              std::to_string(seconds) + "] s");
    }
    if (latency >= 0.0 && latency + duration > seconds + 1e-9) {
        throw ValidationError(what + ": latency + duration exceeds the sample length");
    }
    if (kind == FeatureKind::AlphaSpindle || kind == FeatureKind::EmgNoise) {
        if (!(freq_low > 0.0) || freq_high < freq_low) {
            throw ValidationError(what + ": frequency band [" + std::to_string(freq_low) + ", " +
                                  std::to_string(freq_high) + "] is invalid");
        }
        if (freq_high >= rate / 2.0) {
            throw ValidationError(what + ": frequency " + std::to_string(freq_high) + " Hz violates Nyquist (" +
                                  std::to_string(rate / 2.0) + " Hz)");
        }
    }
}

void SynthConfig::validate() const {
    if (channel_names.empty()) throw ValidationError("synth: channel_names is empty");
    for (std::size_t i = 0; i < channel_names.size(); ++i) {
        for (std::size_t j = i + 1; j < channel_names.size(); ++j) {
            if (channel_names[i] == channel_names[j]) {
                throw ValidationError("synth: duplicate channel name '" + channel_names[i] + "'");
            }
        }
    }
    if (length < 2) throw ValidationError("synth: length must be >= 2");
    if (!(rate > 0.0)) throw ValidationError("synth: rate must be > 0");
    if (classes.size() < 2) throw ValidationError("synth: need at least two classes");
    if (samples_per_class == 0) throw ValidationError("synth: samples_per_class must be > 0");
    if (subjects == 0) throw ValidationError("synth: subjects must be > 0");
    if (!(background_amplitude >= 0.0)) throw ValidationError("synth: background_amplitude must be >= 0");
    if (!(subject_gain_spread >= 0.0 && subject_gain_spread < 1.0)) {
        throw ValidationError("synth: subject_gain_spread must lie in [0, 1)");
    }
    for (const auto& c : classes) {
        for (const auto& f : c.features) {
            try {
                f.validate(rate, length, channel_names);
            } catch (const ValidationError& e) {
                throw ValidationError("synth class '" + c.name + "': " + e.what());
            }
        }
    }
}

std::vector<std::size_t> Dataset::subject_ids() const {
    std::vector<std::size_t> ids;
    for (const auto& s : samples) ids.push_back(s.subject);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::size_t Dataset::index_of_id(std::size_t id) const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].id == id) return i;
    }
    throw ValidationError("dataset has no sample with id " + std::to_string(id));
}

void Dataset::validate() const {
    if (channel_names.size() != channels) {
        throw ValidationError("dataset: " + std::to_string(channel_names.size()) + " channel names for " +
                              std::to_string(channels) + " channels");
    }
    for (const auto& s : samples) {
        if (s.data.size() != channels * length) {
            throw ShapeError("dataset: sample " + std::to_string(s.id) + " has shape " +
                             shape_string(s.data.shape()));
        }
        if (!class_names.empty() && s.label >= class_names.size()) {
            throw ValidationError("dataset: sample " + std::to_string(s.id) + " has label " +
                                  std::to_string(s.label) + " >= " + std::to_string(class_names.size()));
        }
        if (!s.data.all_finite()) throw NumericError("dataset: sample " + std::to_string(s.id) + " is not finite");
    }
}

Dataset generate_dataset(const SynthConfig& config) {
    config.validate();
    const std::size_t n = config.channel_names.size();
    const std::size_t t = config.length;
    Dataset ds;
    ds.channels = n;
    ds.length = t;
    ds.rate = config.rate;
    ds.channel_names = config.channel_names;
    for (const auto& c : config.classes) ds.class_names.push_back(c.name);
    ds.samples.reserve(config.subjects * config.classes.size() * config.samples_per_class);

    std::size_t id = 0;
    for (std::size_t s = 0; s < config.subjects; ++s) {
        CounterRng subject_rng(derive_seed(config.seed, {s, 0x5B}));
        const double gain = 1.0 + config.subject_gain_spread * (2.0 * subject_rng.uniform() - 1.0);
        for (std::size_t i = 0; i < config.samples_per_class; ++i) {
            for (std::size_t c = 0; c < config.classes.size(); ++c) {
                const std::uint64_t key = derive_seed(config.seed, {s, c, i});
                std::vector<double> x(n * t, 0.0);
                for (std::size_t ch = 0; ch < n; ++ch) {
                    CounterRng rng(derive_seed(key, {0, ch}));
                    const auto noise = pink_noise(t, rng);
                    for (std::size_t j = 0; j < t; ++j) x[ch * t + j] = config.background_amplitude * noise[j];
                }
                const auto& features = config.classes[c].features;
                for (std::size_t f = 0; f < features.size(); ++f) {
                    CounterRng rng(derive_seed(key, {1, f}));
                    inject(features[f], config, gain, rng, x);
                }
                EEGSample sample;
                sample.data = Tensor({n, t});
                for (std::size_t k = 0; k < x.size(); ++k) sample.data[k] = static_cast<float>(x[k]);
                sample.label = c;
                sample.subject = s;
                sample.id = id++;
                ds.samples.push_back(std::move(sample));
            }
        }
    }
    return ds;
}

SynthConfig spindle_vs_emg_config(const std::vector<std::string>& channel_names, std::uint64_t seed) {
    auto keep = [&](std::vector<std::string> wanted) {
        std::vector<std::string> out;
        for (auto& w : wanted) {
            if (std::find(channel_names.begin(), channel_names.end(), w) != channel_names.end()) out.push_back(w);
        }
        return out;
    };
    FeatureSpec emg = FeatureSpec::defaults(FeatureKind::EmgNoise);
    emg.channels = keep({"FT7", "FT8", "T3", "T4", "TP7", "TP8", "T5", "T6"});
    FeatureSpec spindle = FeatureSpec::defaults(FeatureKind::AlphaSpindle);
    spindle.channels = keep({"P3", "PZ", "P4", "O1", "OZ", "O2"});

    SynthConfig cfg;
    cfg.channel_names = channel_names;
    cfg.classes = {{"alert", {emg}}, {"drowsy", {spindle}}};
    cfg.seed = seed;
    return cfg;
}

DatasetSplit split_leave_one_subject_out(const Dataset& dataset, std::size_t held_out_subject) {
    const auto ids = dataset.subject_ids();
    if (std::find(ids.begin(), ids.end(), held_out_subject) == ids.end()) {
        throw ValidationError("leave-one-subject-out: unknown subject " + std::to_string(held_out_subject));
    }
    DatasetSplit split{dataset, dataset};
    split.train.samples.clear();
    split.test.samples.clear();
    for (const auto& s : dataset.samples) {
        (s.subject == held_out_subject ? split.test : split.train).samples.push_back(s);
    }
    return split;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    dataset.validate();
    nlohmann::ordered_json m;
    m["format"] = "eegattr-dataset";
    m["version"] = detail::kFormatVersion;
    m["channels"] = dataset.channels;
    m["length"] = dataset.length;
    m["rate"] = dataset.rate;
    m["channel_names"] = dataset.channel_names;
    m["class_names"] = dataset.class_names;
    std::vector<std::size_t> labels, subjects, ids, targets;
    std::vector<std::uint8_t> blob;
    blob.reserve(dataset.samples.size() * dataset.channels * dataset.length * 4);
    for (const auto& s : dataset.samples) {
        labels.push_back(s.label);
        subjects.push_back(s.subject);
        ids.push_back(s.id);
        targets.push_back(s.target);
        detail::append_floats(blob, s.data.values());
    }
    m["samples"] = dataset.samples.size();
    m["labels"] = labels;
    m["subjects"] = subjects;
    m["ids"] = ids;
    if (!dataset.map_method.empty()) {
        m["method"] = dataset.map_method;
        m["targets"] = targets;
    }
    detail::write_container(path, kDatasetMagic, std::move(m), blob);
}

Dataset load_dataset(const std::filesystem::path& path) {
    auto c = detail::read_container(path, kDatasetMagic);
    const auto& m = c.manifest;
    const std::string where = "'" + path.string() + "'";
    Dataset ds;
    std::vector<std::size_t> labels, subjects, ids, targets;
    std::size_t count = 0;
    try {
        ds.channels = m.at("channels").get<std::size_t>();
        ds.length = m.at("length").get<std::size_t>();
        ds.rate = m.at("rate").get<double>();
        ds.channel_names = m.at("channel_names").get<std::vector<std::string>>();
        ds.class_names = m.at("class_names").get<std::vector<std::string>>();
        count = m.at("samples").get<std::size_t>();
        labels = m.at("labels").get<std::vector<std::size_t>>();
        subjects = m.at("subjects").get<std::vector<std::size_t>>();
        ids = m.at("ids").get<std::vector<std::size_t>>();
        if (m.contains("method")) {
            ds.map_method = m.at("method").get<std::string>();
            targets = m.at("targets").get<std::vector<std::size_t>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + ": bad manifest field: " + e.what());
    }
    if (labels.size() != count || subjects.size() != count || ids.size() != count ||
        (!ds.map_method.empty() && targets.size() != count)) {
        throw ShapeMismatchError(where + ": per-sample manifest lists do not have " + std::to_string(count) +
                                 " entries");
    }
    const std::size_t per = ds.channels * ds.length;
    if (c.blob.size() != count * per * 4) {
        throw ShapeMismatchError(where + ": blob holds " + std::to_string(c.blob.size()) + " bytes, expected " +
                                 std::to_string(count * per * 4) + " for " + std::to_string(count) + " samples of " +
                                 std::to_string(ds.channels) + "x" + std::to_string(ds.length));
    }
    ds.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& s = ds.samples[i];
        s.data = Tensor({ds.channels, ds.length}, detail::read_floats(c.blob, i * per * 4, per));
        s.label = labels[i];
        s.subject = subjects[i];
        s.id = ids[i];
        if (!targets.empty()) s.target = targets[i];
    }
    try {
        ds.validate();
    } catch (const Error& e) {
        throw FormatError(where + ": " + e.what());
    }
    return ds;
}

}  // namespace eegattr
