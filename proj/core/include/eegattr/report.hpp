#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "eegattr/attribution.hpp"
#include "eegattr/evaluation.hpp"
#include "eegattr/pipeline.hpp"

namespace eegattr {

struct ReportContext {
    std::string model;
    std::string subject;
    std::size_t sample_id = 0;
    std::size_t true_label = 0;
    std::vector<std::string> channel_names;
    /// Optional display names; class indices are printed when empty.
    std::vector<std::string> class_names;
};

struct ChannelPortion {
    std::string channel;
    double portion = 0.0;  // deleted points on this channel / (N * T)
};

struct Report {
    // header
    std::string subject;
    std::size_t sample_id = 0;
    std::string true_label;
    std::vector<std::string> class_labels;
    std::vector<double> probabilities;
    std::size_t predicted = 0;
    // line 1
    std::string model;
    std::string method;
    std::size_t window = 0;
    double sample_threshold = 0.0;
    double channel_threshold = 0.0;
    // line 2
    std::vector<double> fractions;
    std::vector<std::optional<double>> sensitivity_r;
    std::optional<double> channel_r;
    // line 3
    double probability_after_points = 0.0;
    double portion_deleted = 0.0;
    std::vector<ChannelPortion> top_channels;  // at most three
    // line 4
    double probability_after_channels = 0.0;
    std::vector<std::string> deleted_channels;

    /// Header plus four lines, newline-terminated.
    std::string text() const;
};

/// Sensitivity runs on the original map (and its channel map); the deletions
/// zero exactly the highlighted points and channels of `processed`.
/// Probabilities refer to the originally predicted class.
Report generate_report(const NetworkSpec& net, const BatchStats& stats, const Tensor& sample,
                       const ContributionMap& map, const ProcessedMaps& processed, const PipelineConfig& pipeline,
                       const MetricConfig& metric, const ReportContext& context);

}  // namespace eegattr
