#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegattr/evaluation.hpp"
#include "eegattr/pipeline.hpp"
#include "eegattr/synth.hpp"
#include "eegattr/train.hpp"

namespace eegattr::cli {

/// Bad invocation: unknown names, missing required settings. Exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::string kRandomMethod = "random";

struct SynthSettings {
    std::vector<std::string> channels;  // empty: the bundled 30-channel montage
    std::size_t length = 384;
    double rate = 128.0;
    std::size_t subjects = 11;
    std::size_t samples_per_class = 50;
    double background_amplitude = 1.0;
    double subject_gain_spread = 0.2;
    /// Empty: the spindle-vs-EMG scenario.
    std::vector<ClassSpec> classes;
};

struct MethodSettings {
    std::size_t ig_steps = 100;
    double lrp_epsilon = 1e-4;
    double deeplift_delta = 1e-6;
};

struct SampleSelection {
    std::optional<std::size_t> subject;
    std::vector<std::size_t> ids;
    std::optional<std::size_t> limit;
};

struct Paths {
    std::filesystem::path dataset;
    std::filesystem::path weights;
    std::filesystem::path layout;
    std::filesystem::path maps;
    std::filesystem::path output = ".";
};

struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::string model = "interpretable_cnn";
    std::map<std::string, std::string> model_options;
    std::vector<std::string> methods;  // empty: every method
    MethodSettings method_settings;
    PipelineConfig pipeline;
    MetricConfig metrics;
    TrainConfig training;
    std::optional<std::size_t> held_out_subject;
    SynthSettings synth;
    SampleSelection samples;
    Paths paths;
    std::size_t jobs = 1;

    /// Seed or UsageError naming the command.
    std::uint64_t require_seed(const std::string& command) const;
    /// Requested methods (closed set plus "random"); UsageError on unknown names.
    std::vector<std::string> method_list() const;
};

/// Parses a JSON config file. Relative paths resolve against the file's
/// directory. Unknown keys are rejected with the offending key path.
RunConfig load_config(const std::filesystem::path& path);

/// Throws UsageError listing the valid names.
void check_method_name(const std::string& name);
void check_model_name(const std::string& name);

std::vector<std::string> split_list(const std::string& text);
std::vector<double> parse_fractions(const std::string& text);

}  // namespace eegattr::cli
