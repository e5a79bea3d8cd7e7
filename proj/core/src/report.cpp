#include "eegattr/report.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "eegattr/models.hpp"
#include "eegattr/rng.hpp"

namespace eegattr {

namespace {

std::string fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

std::string coefficient(const std::optional<double>& r) { return r ? fixed(*r, 3) : "undefined"; }

std::string label_of(const std::vector<std::string>& names, std::size_t k) {
    return k < names.size() ? names[k] : std::to_string(k);
}

}  // namespace

std::string Report::text() const {
    std::string out;
    out += "Subject " + subject + " | Sample " + std::to_string(sample_id) + " | True label " + true_label + " |";
    for (std::size_t k = 0; k < probabilities.size(); ++k) {
        out += " P(" + class_labels[k] + ")=" + fixed(probabilities[k], 3);
    }
    out += "\n";
    out += "Model " + model + " | Method " + method + " | Window " + std::to_string(window) + " | Thresholds " +
           fixed(sample_threshold, 2) + " / " + fixed(channel_threshold, 2) + "\n";
    out += "Sensitivity r:";
    for (std::size_t f = 0; f < fractions.size(); ++f) {
        out += " " + fixed(fractions[f], 2) + "=" + coefficient(sensitivity_r[f]);
    }
    out += " | Channel r " + coefficient(channel_r) + "\n";
    out += "Highlighted points deleted: P=" + fixed(probability_after_points, 3) + " | Portion " +
           fixed(portion_deleted, 3) + " | Top channels";
    if (top_channels.empty()) out += " none";
    for (const auto& c : top_channels) out += " " + c.channel + "(" + fixed(c.portion, 3) + ")";
    out += "\n";
    out += "Highlighted channels deleted: P=" + fixed(probability_after_channels, 3) + " | Channels ";
    if (deleted_channels.empty()) out += "none";
    for (std::size_t i = 0; i < deleted_channels.size(); ++i) out += (i ? ", " : "") + deleted_channels[i];
    out += "\n";
    return out;
}

Report generate_report(const NetworkSpec& net, const BatchStats& stats, const Tensor& sample,
                       const ContributionMap& map, const ProcessedMaps& processed, const PipelineConfig& pipeline,
                       const MetricConfig& metric, const ReportContext& context) {
    const std::size_t n = net.channels;
    const std::size_t t = net.length;
    if (context.channel_names.size() != n) {
        throw ValidationError("report: " + std::to_string(context.channel_names.size()) + " channel names for " +
                              std::to_string(n) + " channels");
    }
    if (processed.highlighted_points.size() != n * t) {
        throw ShapeError("report: processed mask does not cover " + std::to_string(n) + "x" + std::to_string(t));
    }
    const Tensor x = sample.reshaped({n, t});
    const auto trace = forward(net, x, stats);
    const std::size_t c = argmax(trace.probabilities.values());

    Report rep;
    rep.subject = context.subject;
    rep.sample_id = context.sample_id;
    rep.true_label = label_of(context.class_names, context.true_label);
    for (std::size_t k = 0; k < net.classes; ++k) {
        rep.class_labels.push_back(label_of(context.class_names, k));
        rep.probabilities.push_back(trace.probabilities[k]);
    }
    rep.predicted = c;
    rep.model = context.model;
    rep.method = map.method;
    rep.window = pipeline.smoothing_window;
    rep.sample_threshold = pipeline.sample_threshold;
    rep.channel_threshold = pipeline.channel_threshold;

    const auto sens = patch_sensitivity(net, x, stats, map.values, metric.fractions, metric.trials,
                                        derive_seed(metric.seed, {context.sample_id}));
    rep.fractions = sens.fractions;
    rep.sensitivity_r = sens.r;
    if (n >= 2) rep.channel_r = channel_sensitivity(net, x, stats, channel_contribution(map).values);

    Tensor pruned = x;
    std::vector<std::size_t> per_channel(n, 0);
    for (std::size_t i = 0; i < n * t; ++i) {
        if (!processed.highlighted_points[i]) continue;
        pruned[i] = 0.0f;
        ++per_channel[i / t];
    }
    const double total = static_cast<double>(n * t);
    rep.probability_after_points = forward(net, pruned, stats).probabilities[c];
    rep.portion_deleted = static_cast<double>(processed.highlighted_count()) / total;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return per_channel[a] > per_channel[b]; });
    for (std::size_t i = 0; i < std::min<std::size_t>(3, n); ++i) {
        if (per_channel[order[i]] == 0) break;
        rep.top_channels.push_back(
            {context.channel_names[order[i]], static_cast<double>(per_channel[order[i]]) / total});
    }

    Tensor without = x;
    for (const std::size_t ch : processed.highlighted_channels) {
        for (std::size_t j = 0; j < t; ++j) without[ch * t + j] = 0.0f;
        rep.deleted_channels.push_back(context.channel_names[ch]);
    }
    rep.probability_after_channels = forward(net, without, stats).probabilities[c];
    return rep;
}

}  // namespace eegattr
