#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegattr/attribution.hpp"
#include "eegattr/engine.hpp"

namespace eegattr {

/// Pearson correlation. nullopt when either series has zero variance.
/// Throws ValidationError on length mismatch or fewer than two points.
std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

inline const std::vector<double> kDefaultFractions = {0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr std::size_t kDefaultTrials = 100;

struct SensitivityResult {
    std::vector<double> fractions;
    /// One coefficient per fraction; nullopt marks a zero-variance series.
    std::vector<std::optional<double>> r;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

/// For each fraction f: `trials` times, zero a window of round(f*T) points on
/// one channel (channel and start drawn from derive_seed(seed, {f_index,
/// trial})), record the drop of the originally predicted logit and the map
/// sum inside the window, and correlate the two lists.
SensitivityResult patch_sensitivity(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                                    const Tensor& map, std::span<const double> fractions = kDefaultFractions,
                                    std::size_t trials = kDefaultTrials, std::uint64_t seed = 0);

/// Zero each channel once; correlate channel_map[i] * T with the logit drop.
std::optional<double> channel_sensitivity(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                                          const Tensor& channel_map);

struct DeletionCurve {
    std::vector<double> probabilities;
    double aupc = 0.0;
};

/// Removes the top 1%, 2%, ..., 100% of points (descending score, ties in
/// (channel, time) order) cumulatively and records the probability of the
/// originally predicted class after each step.
DeletionCurve deletion_curve(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats, const Tensor& map);

/// Zeroing order of deletion_curve: flat indices sorted by descending score.
std::vector<std::size_t> deletion_order(std::span<const float> scores);

enum class ChannelDeletionMode {
    Cumulative,   // channel k is removed together with all higher-ranked ones
    Independent,  // channel k is removed alone
};

DeletionCurve channel_deletion_curve(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                                     const Tensor& channel_map,
                                     ChannelDeletionMode mode = ChannelDeletionMode::Cumulative);

struct MetricConfig {
    std::vector<double> fractions = kDefaultFractions;
    std::size_t trials = kDefaultTrials;
    std::uint64_t seed = 0;
    ChannelDeletionMode channel_mode = ChannelDeletionMode::Cumulative;
};

/// Every metric for one map of one sample.
struct SampleEvaluation {
    std::size_t sample_id = 0;
    std::string method;
    std::size_t predicted = 0;
    SensitivityResult sensitivity;
    std::optional<double> channel_r;
    DeletionCurve deletion;
    DeletionCurve channel_deletion;
};

/// Patch placement derives from (config.seed, sample_id), so every method
/// evaluated on the same sample sees the same patches.
SampleEvaluation evaluate_map(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                              const ContributionMap& map, const MetricConfig& config, std::size_t sample_id);

struct Distribution {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
    std::size_t count = 0;
    std::size_t undefined = 0;
};

/// Quantiles with linear interpolation between order statistics. Undefined
/// entries are excluded and counted; throws ValidationError when none remain.
Distribution summarize(std::span<const std::optional<double>> values);
Distribution summarize(std::span<const double> values);

struct MethodSummary {
    std::string method;
    Distribution r_all;  // every fraction pooled
    std::vector<Distribution> r_by_fraction;
    /// nullopt when every channel coefficient is undefined (e.g. N = 1).
    std::optional<Distribution> channel_r;
    Distribution aupc;
    Distribution channel_aupc;
    /// Pointwise mean deletion curve.
    std::vector<double> mean_curve;
};

struct EvalSummary {
    std::vector<MethodSummary> methods;  // order of first appearance
};

EvalSummary aggregate(std::span<const SampleEvaluation> results);

}  // namespace eegattr
