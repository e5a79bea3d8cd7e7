#pragma once

#include <string>
#include <vector>

#include "eegattr/attribution.hpp"
#include "eegattr/models.hpp"
#include "eegattr/pipeline.hpp"
#include "eegattr/report.hpp"
#include "eegattr/synth.hpp"
#include "eegattr/train.hpp"

namespace testing {

/// A pinned end-to-end run: small synthetic set, short training, one report.
inline std::string golden_report_text() {
    using namespace eegattr;
    const std::vector<std::string> names{"T3", "CZ", "T4", "PZ"};
    auto cfg = spindle_vs_emg_config(names, 2024);
    cfg.length = 128;
    cfg.samples_per_class = 5;
    cfg.subjects = 2;
    const auto data = generate_dataset(cfg);

    std::vector<Tensor> xs;
    std::vector<std::size_t> ys;
    for (const auto& s : data.samples) {
        xs.push_back(s.data);
        ys.push_back(s.label);
    }
    InterpretableCnnOptions opt;
    opt.kernels = 4;
    opt.temporal_kernel = 16;
    const auto init = build_interpretable_cnn(names.size(), cfg.length, 2, opt, 5);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 5;
    tc.learning_rate = 0.01;
    tc.seed = 6;
    const auto net = train(init, xs, ys, tc).net;
    const auto stats = compute_batch_stats(net, xs);

    const auto& sample = data.samples[3];
    const auto map = attribute(net, sample.data, stats, {method::GradTimesInput{}, {}});
    const PipelineConfig pipeline;
    const auto processed = process(map.values, channel_contribution(map).values, pipeline);
    MetricConfig metric;
    metric.trials = 20;
    metric.seed = 7;
    ReportContext ctx{"interpretable_cnn", std::to_string(sample.subject), sample.id, sample.label, names,
                      data.class_names};
    return generate_report(net, stats, sample.data, map, processed, pipeline, metric, ctx).text();
}

}  // namespace testing
