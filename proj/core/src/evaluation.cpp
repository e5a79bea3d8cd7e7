#include "eegattr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eegattr/models.hpp"
#include "eegattr/rng.hpp"

namespace eegattr {

namespace {

void require_map_shape(const NetworkSpec& net, const Tensor& sample, const Tensor& map, const char* op) {
    if (sample.size() != net.channels * net.length) {
        throw ShapeError(std::string(op) + ": sample shape " + shape_string(sample.shape()) +
                         " does not match network input");
    }
    if (map.size() != sample.size()) {
        throw ShapeError(std::string(op) + ": map shape " + shape_string(map.shape()) + " differs from sample shape " +
                         shape_string(sample.shape()));
    }
}

double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw ValidationError("pearson: series lengths differ (" + std::to_string(xs.size()) + " vs " +
                              std::to_string(ys.size()) + ")");
    }
    if (xs.size() < 2) throw ValidationError("pearson: need at least two points");
    const double mx = mean_of(xs);
    const double my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

SensitivityResult patch_sensitivity(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                                    const Tensor& map, std::span<const double> fractions, std::size_t trials,
                                    std::uint64_t seed) {
    require_map_shape(net, sample, map, "patch_sensitivity");
    if (trials < 2) throw ValidationError("patch_sensitivity: need at least two trials");
    const std::size_t n = net.channels;
    const std::size_t t = net.length;
    const Tensor x = sample.reshaped({n, t});
    const auto trace = forward(net, x, stats);
    const std::size_t c = argmax(trace.probabilities.values());
    const double original = trace.logits[c];

    SensitivityResult result;
    result.fractions.assign(fractions.begin(), fractions.end());
    result.trials = trials;
    result.seed = seed;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
        const long len = std::lround(fractions[fi] * static_cast<double>(t));
        if (len < 1) {
            throw ValidationError("patch_sensitivity: fraction " + std::to_string(fractions[fi]) + " of T=" +
                                  std::to_string(t) + " gives an empty patch");
        }
        const auto patch = static_cast<std::size_t>(len);
        if (patch > t) throw ValidationError("patch_sensitivity: fraction " + std::to_string(fractions[fi]) + " > 1");
        std::vector<double> sums(trials), drops(trials);
        Tensor perturbed = x;
        for (std::size_t k = 0; k < trials; ++k) {
            CounterRng rng(derive_seed(seed, {fi, k}));
            const std::size_t ch = rng.below(n);
            const std::size_t start = rng.below(t - patch + 1);
            double s = 0.0;
            for (std::size_t j = start; j < start + patch; ++j) {
                s += map[ch * t + j];
                perturbed[ch * t + j] = 0.0f;
            }
            sums[k] = s;
            drops[k] = original - forward_logit(net, perturbed, stats, c);
            for (std::size_t j = start; j < start + patch; ++j) perturbed[ch * t + j] = x[ch * t + j];
        }
        result.r.push_back(pearson(sums, drops));
    }
    return result;
}

std::optional<double> channel_sensitivity(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                                          const Tensor& channel_map) {
    const std::size_t n = net.channels;
    const std::size_t t = net.length;
    if (n < 2) throw ValidationError("channel_sensitivity: need at least two channels");
    if (channel_map.size() != n) {
        throw ShapeError("channel_sensitivity: channel map has " + std::to_string(channel_map.size()) +
                         " entries for " + std::to_string(n) + " channels");
    }
    const Tensor x = sample.reshaped({n, t});
    const auto trace = forward(net, x, stats);
    const std::size_t c = argmax(trace.probabilities.values());
    const double original = trace.logits[c];
    std::vector<double> scores(n), drops(n);
    Tensor perturbed = x;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < t; ++j) perturbed[i * t + j] = 0.0f;
        drops[i] = original - forward_logit(net, perturbed, stats, c);
        for (std::size_t j = 0; j < t; ++j) perturbed[i * t + j] = x[i * t + j];
        scores[i] = static_cast<double>(channel_map[i]) * static_cast<double>(t);
    }
    return pearson(scores, drops);
}

std::vector<std::size_t> deletion_order(std::span<const float> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

DeletionCurve deletion_curve(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats, const Tensor& map) {
    require_map_shape(net, sample, map, "deletion_curve");
    const std::size_t total = sample.size();
    Tensor x = sample.reshaped({net.channels, net.length});
    const std::size_t c = argmax(forward(net, x, stats).probabilities.values());
    const auto order = deletion_order(map.values());

    DeletionCurve curve;
    curve.probabilities.reserve(100);
    std::size_t removed = 0;
    for (std::size_t step = 1; step <= 100; ++step) {
        const std::size_t upto = (step * total + 50) / 100;
        for (; removed < upto; ++removed) x[order[removed]] = 0.0f;
        curve.probabilities.push_back(forward(net, x, stats).probabilities[c]);
    }
    curve.aupc = mean_of(curve.probabilities);
    return curve;
}

DeletionCurve channel_deletion_curve(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                                     const Tensor& channel_map, ChannelDeletionMode mode) {
    const std::size_t n = net.channels;
    const std::size_t t = net.length;
    if (channel_map.size() != n) {
        throw ShapeError("channel_deletion_curve: channel map has " + std::to_string(channel_map.size()) +
                         " entries for " + std::to_string(n) + " channels");
    }
    const Tensor original = sample.reshaped({n, t});
    const std::size_t c = argmax(forward(net, original, stats).probabilities.values());
    const auto order = deletion_order(channel_map.values());

    DeletionCurve curve;
    Tensor x = original;
    for (const std::size_t ch : order) {
        if (mode == ChannelDeletionMode::Independent) x = original;
        for (std::size_t j = 0; j < t; ++j) x[ch * t + j] = 0.0f;
        curve.probabilities.push_back(forward(net, x, stats).probabilities[c]);
    }
    curve.aupc = mean_of(curve.probabilities);
    return curve;
}

SampleEvaluation evaluate_map(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                              const ContributionMap& map, const MetricConfig& config, std::size_t sample_id) {
    SampleEvaluation ev;
    ev.sample_id = sample_id;
    ev.method = map.method;
    ev.predicted = argmax(forward(net, sample, stats).probabilities.values());
    ev.sensitivity = patch_sensitivity(net, sample, stats, map.values, config.fractions, config.trials,
                                       derive_seed(config.seed, {sample_id}));
    const auto channel_map = channel_contribution(map);
    if (net.channels >= 2) ev.channel_r = channel_sensitivity(net, sample, stats, channel_map.values);
    ev.deletion = deletion_curve(net, sample, stats, map.values);
    ev.channel_deletion = channel_deletion_curve(net, sample, stats, channel_map.values, config.channel_mode);
    return ev;
}

Distribution summarize(std::span<const std::optional<double>> values) {
    std::vector<double> defined;
    std::size_t undefined = 0;
    for (const auto& v : values) {
        if (v) {
            defined.push_back(*v);
        } else {
            ++undefined;
        }
    }
    if (defined.empty()) {
        throw ValidationError("summarize: no defined values among " + std::to_string(values.size()));
    }
    auto d = summarize(defined);
    d.undefined = undefined;
    return d;
}

Distribution summarize(std::span<const double> values) {
    if (values.empty()) throw ValidationError("summarize: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    Distribution d;
    d.min = v.front();
    d.max = v.back();
    d.q1 = quantile_sorted(v, 0.25);
    d.median = quantile_sorted(v, 0.5);
    d.q3 = quantile_sorted(v, 0.75);
    d.mean = mean_of(values);
    d.count = v.size();
    return d;
}

EvalSummary aggregate(std::span<const SampleEvaluation> results) {
    if (results.empty()) throw ValidationError("aggregate: no results");
    EvalSummary summary;
    std::vector<std::string> order;
    for (const auto& r : results) {
        if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
    }
    for (const auto& method : order) {
        std::vector<std::optional<double>> r_all, channel_r;
        std::vector<std::vector<std::optional<double>>> by_fraction;
        std::vector<double> aupc, channel_aupc;
        std::vector<double> curve_sum;
        std::size_t curves = 0;
        for (const auto& r : results) {
            if (r.method != method) continue;
            if (by_fraction.size() < r.sensitivity.r.size()) by_fraction.resize(r.sensitivity.r.size());
            for (std::size_t f = 0; f < r.sensitivity.r.size(); ++f) {
                r_all.push_back(r.sensitivity.r[f]);
                by_fraction[f].push_back(r.sensitivity.r[f]);
            }
            channel_r.push_back(r.channel_r);
            aupc.push_back(r.deletion.aupc);
            channel_aupc.push_back(r.channel_deletion.aupc);
            if (curve_sum.size() < r.deletion.probabilities.size()) curve_sum.resize(r.deletion.probabilities.size());
            for (std::size_t k = 0; k < r.deletion.probabilities.size(); ++k) curve_sum[k] += r.deletion.probabilities[k];
            ++curves;
        }
        MethodSummary ms;
        ms.method = method;
        ms.r_all = summarize(r_all);
        for (const auto& f : by_fraction) ms.r_by_fraction.push_back(summarize(f));
        if (std::any_of(channel_r.begin(), channel_r.end(), [](const auto& v) { return v.has_value(); })) {
            ms.channel_r = summarize(channel_r);
        }
        ms.aupc = summarize(aupc);
        ms.channel_aupc = summarize(channel_aupc);
        for (auto& v : curve_sum) v /= static_cast<double>(curves);
        ms.mean_curve = std::move(curve_sum);
        summary.methods.push_back(std::move(ms));
    }
    return summary;
}

}  // namespace eegattr
