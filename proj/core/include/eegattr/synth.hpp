#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eegattr/tensor.hpp"

namespace eegattr {

enum class FeatureKind { AlphaSpindle, BlinkPulse, EmgNoise, FrnTransient, PinkBackground };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

/// One waveform archetype injected into every sample of a class.
///
///  - alpha_spindle: Hann-windowed carrier, frequency drawn from [freq_low, freq_high]
///  - blink_pulse: one-period biphasic sine pulse (positive lobe first)
///  - emg_noise: Hann-windowed burst of 16 random sinusoids in [freq_low, freq_high]
///  - frn_transient: one-period biphasic sine (negative lobe first) at `latency`
///  - pink_background: extra 1/f noise over the whole sample
struct FeatureSpec {
    FeatureKind kind = FeatureKind::AlphaSpindle;
    double amplitude = 1.0;
    double freq_low = 0.0;   // Hz
    double freq_high = 0.0;  // Hz
    double duration = 1.0;   // seconds
    /// Onset in seconds; negative draws a random onset per sample.
    double latency = -1.0;
    /// Target channel names; empty means every channel.
    std::vector<std::string> channels;

    /// Documented parameters of each archetype.
    static FeatureSpec defaults(FeatureKind kind);

    /// Throws ValidationError (duration, Nyquist, amplitude, unknown channel).
    void validate(double rate, std::size_t length, const std::vector<std::string>& channel_names) const;
};

struct ClassSpec {
    std::string name;
    std::vector<FeatureSpec> features;
};

struct SynthConfig {
    std::vector<std::string> channel_names;
    std::size_t length = 384;
    double rate = 128.0;
    std::vector<ClassSpec> classes;
    std::size_t samples_per_class = 50;  // per subject
    std::size_t subjects = 11;
    double background_amplitude = 1.0;
    /// Per-subject gain is drawn from [1 - spread, 1 + spread].
    double subject_gain_spread = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EEGSample {
    Tensor data;  // N x T
    std::size_t label = 0;
    std::size_t subject = 0;
    std::size_t id = 0;
    /// Class the map explains; used when the dataset holds contribution maps.
    std::size_t target = 0;
};

struct Dataset {
    std::size_t channels = 0;
    std::size_t length = 0;
    double rate = 128.0;
    std::vector<std::string> channel_names;
    std::vector<std::string> class_names;
    std::vector<EEGSample> samples;
    /// Non-empty when the samples are contribution maps of this method.
    std::string map_method;

    std::size_t classes() const { return class_names.size(); }
    /// Distinct subject ids, ascending.
    std::vector<std::size_t> subject_ids() const;
    /// Index of the sample with this id; throws ValidationError.
    std::size_t index_of_id(std::size_t id) const;
    void validate() const;
};

/// Pink background on every channel plus the class features. Per subject the
/// classes are interleaved and balanced. Pure function of the config.
Dataset generate_dataset(const SynthConfig& config);

/// Drowsy-like class 1 (alpha spindles on posterior channels) against an
/// alert-like class 0 (EMG bursts on temporal channels). Channels missing from
/// `channel_names` are dropped from the feature targets.
SynthConfig spindle_vs_emg_config(const std::vector<std::string>& channel_names, std::uint64_t seed);

struct DatasetSplit {
    Dataset train;
    Dataset test;
};

DatasetSplit split_leave_one_subject_out(const Dataset& dataset, std::size_t held_out_subject);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace eegattr
