#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "eegattr/attribution.hpp"
#include "eegattr/error.hpp"
#include "eegattr/layout.hpp"
#include "eegattr/models.hpp"
#include "eegattr/render.hpp"
#include "eegattr/report.hpp"
#include "eegattr/rng.hpp"
#include "eegattr/weights_io.hpp"
#include "json.hpp"

namespace eegattr::cli {

namespace {

using nlohmann::ordered_json;

/// Stream id mixed into the seed of random baseline maps.
constexpr std::uint64_t kRandomMapStream = 0x52414E44;

/// Runs fn(0..count-1) on `jobs` threads. Every index writes its own result
/// slot, so output order never depends on scheduling. The lowest-index
/// failure is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw ValidationError(path.string() + ": cannot write file");
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ValidationError(dir.string() + ": cannot create directory: " + ec.message());
}

const std::filesystem::path& require_path(const std::filesystem::path& p, const char* flag) {
    if (p.empty()) throw UsageError(std::string(flag) + " is required");
    return p;
}

Dataset read_dataset(const RunConfig& cfg) {
    const auto& path = require_path(cfg.paths.dataset, "--dataset");
    if (!std::filesystem::exists(path)) throw ValidationError(path.string() + ": dataset file not found");
    return load_dataset(path);
}

NetworkSpec read_weights(const RunConfig& cfg, const Dataset& data) {
    const auto& path = require_path(cfg.paths.weights, "--weights");
    if (!std::filesystem::exists(path)) throw ValidationError(path.string() + ": weights file not found");
    auto net = load_weights(path);
    if (net.channels != data.channels || net.length != data.length || net.classes != data.classes()) {
        throw ValidationError(path.string() + ": network expects " + std::to_string(net.channels) + "x" +
                              std::to_string(net.length) + " inputs and " + std::to_string(net.classes) +
                              " classes; dataset " + cfg.paths.dataset.string() + " has " +
                              std::to_string(data.channels) + "x" + std::to_string(data.length) + " and " +
                              std::to_string(data.classes()));
    }
    return net;
}

std::size_t option_size(const std::map<std::string, std::string>& opts, const std::string& key, std::size_t fallback) {
    const auto it = opts.find(key);
    if (it == opts.end()) return fallback;
    std::size_t v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError("model_options." + key + ": expected a non-negative integer, got " + s);
    }
    return v;
}

NetworkSpec build_model(const RunConfig& cfg, const Dataset& data, std::uint64_t seed) {
    check_model_name(cfg.model);
    const auto& o = cfg.model_options;
    const std::set<std::string> known = cfg.model == "eegnet"
                                            ? std::set<std::string>{"f1", "depth", "temporal_kernel",
                                                                    "separable_kernel", "pool1", "pool2", "dropout"}
                                            : std::set<std::string>{"kernels", "temporal_kernel", "depth"};
    for (const auto& [key, value] : o) {
        if (!known.count(key)) throw ValidationError("model_options." + key + ": not an option of " + cfg.model);
    }
    if (cfg.model == "eegnet") {
        EegNetOptions opt;
        opt.f1 = option_size(o, "f1", opt.f1);
        opt.depth = option_size(o, "depth", opt.depth);
        opt.temporal_kernel = option_size(o, "temporal_kernel", opt.temporal_kernel);
        opt.separable_kernel = option_size(o, "separable_kernel", opt.separable_kernel);
        opt.pool1 = option_size(o, "pool1", opt.pool1);
        opt.pool2 = option_size(o, "pool2", opt.pool2);
        if (const auto it = o.find("dropout"); it != o.end()) opt.dropout = std::stof(it->second);
        return build_eegnet(data.channels, data.length, data.classes(), opt, seed);
    }
    InterpretableCnnOptions opt;
    opt.kernels = option_size(o, "kernels", opt.kernels);
    opt.temporal_kernel = option_size(o, "temporal_kernel", opt.temporal_kernel);
    opt.depth = option_size(o, "depth", opt.depth);
    return build_interpretable_cnn(data.channels, data.length, data.classes(), opt, seed);
}

/// Samples whose batch statistics the network uses at inference: the chosen
/// subject's samples, or the whole dataset.
std::vector<std::size_t> reference_indices(const Dataset& data, const RunConfig& cfg) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        if (!cfg.samples.subject || data.samples[i].subject == *cfg.samples.subject) out.push_back(i);
    }
    if (out.empty()) {
        throw ValidationError(cfg.paths.dataset.string() + ": no samples for subject " +
                              std::to_string(*cfg.samples.subject));
    }
    return out;
}

/// `covered`: sample ids with stored maps; without explicit ids the
/// selection defaults to those.
std::vector<std::size_t> selected_indices(const Dataset& data, const RunConfig& cfg,
                                          const std::set<std::size_t>* covered = nullptr) {
    auto pool = reference_indices(data, cfg);
    std::vector<std::size_t> out;
    if (cfg.samples.ids.empty()) {
        for (const auto i : pool) {
            if (!covered || covered->count(data.samples[i].id)) out.push_back(i);
        }
    } else {
        const std::set<std::size_t> allowed(pool.begin(), pool.end());
        for (const auto id : cfg.samples.ids) {
            const std::size_t idx = data.index_of_id(id);
            if (!allowed.count(idx)) {
                throw ValidationError("samples.ids: sample " + std::to_string(id) + " does not belong to subject " +
                                      std::to_string(*cfg.samples.subject));
            }
            out.push_back(idx);
        }
    }
    if (cfg.samples.limit && out.size() > *cfg.samples.limit) out.resize(*cfg.samples.limit);
    return out;
}

BatchStats reference_stats(const NetworkSpec& net, const Dataset& data, const RunConfig& cfg) {
    std::vector<Tensor> batch;
    for (const auto i : reference_indices(data, cfg)) batch.push_back(data.samples[i].data);
    return compute_batch_stats(net, batch);
}

MethodSpec method_spec(const std::string& name, const MethodSettings& s) {
    auto spec = method_from_name(name);
    if (auto* ig = std::get_if<method::IntegratedGradients>(&spec.variant)) ig->steps = s.ig_steps;
    if (auto* e = std::get_if<method::EpsilonLrp>(&spec.variant)) e->epsilon = s.lrp_epsilon;
    if (auto* d = std::get_if<method::DeepLiftRescale>(&spec.variant)) d->near_zero_delta = s.deeplift_delta;
    return spec;
}

ContributionMap compute_map(const NetworkSpec& net, const BatchStats& stats, const EEGSample& sample,
                            const std::string& name, const RunConfig& cfg) {
    if (name == kRandomMethod) {
        const std::uint64_t seed = derive_seed(cfg.seed.value_or(0), {kRandomMapStream, sample.id});
        auto m = random_baseline_map(net.channels, net.length, seed);
        m.target_class = argmax(forward(net, sample.data, stats).probabilities.values());
        return m;
    }
    return attribute(net, sample.data, stats, method_spec(name, cfg.method_settings));
}

/// Maps from an attribute output file, keyed by sample id.
struct StoredMaps {
    std::string method;
    std::map<std::size_t, ContributionMap> by_id;
};

std::optional<StoredMaps> read_stored_maps(const RunConfig& cfg, const Dataset& data) {
    if (cfg.paths.maps.empty()) return std::nullopt;
    if (!std::filesystem::exists(cfg.paths.maps)) {
        throw ValidationError(cfg.paths.maps.string() + ": maps file not found");
    }
    const auto maps = load_dataset(cfg.paths.maps);
    if (maps.map_method.empty()) throw ValidationError(cfg.paths.maps.string() + ": not a contribution-map file");
    if (maps.channels != data.channels || maps.length != data.length) {
        throw ValidationError(cfg.paths.maps.string() + ": map shape differs from the dataset");
    }
    StoredMaps out{maps.map_method, {}};
    for (const auto& s : maps.samples) out.by_id[s.id] = ContributionMap{s.data, maps.map_method, s.target};
    return out;
}

std::set<std::size_t> covered_ids(const std::optional<StoredMaps>& maps) {
    std::set<std::size_t> out;
    if (maps) {
        for (const auto& [id, map] : maps->by_id) out.insert(id);
    }
    return out;
}

const ContributionMap& stored_map(const StoredMaps& maps, const EEGSample& s, const RunConfig& cfg) {
    const auto it = maps.by_id.find(s.id);
    if (it == maps.by_id.end()) {
        throw ValidationError(cfg.paths.maps.string() + ": no map for sample " + std::to_string(s.id));
    }
    return it->second;
}

std::string class_label(const Dataset& data, std::size_t k) {
    return k < data.class_names.size() ? data.class_names[k] : std::to_string(k);
}

std::string view_title(const Dataset& data, const EEGSample& s, const Tensor& probs, const std::string& method) {
    std::string title = "Subject " + std::to_string(s.subject) + " | Sample " + std::to_string(s.id) +
                        " | True label " + class_label(data, s.label) + " |";
    for (std::size_t k = 0; k < probs.size(); ++k) title += " P(" + class_label(data, k) + ")=" + fixed(probs[k], 3);
    return title + " | " + method;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json record_json(const SampleEvaluation& ev, const EEGSample& s) {
    ordered_json r;
    r["sample_id"] = s.id;
    r["subject"] = s.subject;
    r["label"] = s.label;
    r["method"] = ev.method;
    r["predicted"] = ev.predicted;
    r["fractions"] = ev.sensitivity.fractions;
    ordered_json rs = ordered_json::array();
    for (const auto& v : ev.sensitivity.r) rs.push_back(optional_number(v));
    r["r"] = rs;
    r["channel_r"] = optional_number(ev.channel_r);
    r["aupc"] = ev.deletion.aupc;
    r["channel_aupc"] = ev.channel_deletion.aupc;
    r["curve"] = ev.deletion.probabilities;
    r["channel_curve"] = ev.channel_deletion.probabilities;
    return r;
}

ordered_json distribution_json(const Distribution& d) {
    return ordered_json{{"min", d.min},   {"q1", d.q1},       {"median", d.median},      {"q3", d.q3},
                        {"max", d.max},   {"mean", d.mean},   {"count", d.count},        {"undefined", d.undefined}};
}

std::string summary_table(const EvalSummary& summary) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "%-20s %6s %9s %8s %8s %8s %11s %10s %12s %13s\n", "method", "n", "r median",
                  "r q1", "r q3", "r mean", "ch r median", "AUPC mean", "AUPC median", "ch AUPC mean");
    out += line;
    for (const auto& m : summary.methods) {
        const std::string ch = m.channel_r ? fixed(m.channel_r->median, 3) : "undefined";
        std::snprintf(line, sizeof line, "%-20s %6zu %9.3f %8.3f %8.3f %8.3f %11s %10.3f %12.3f %13.3f\n",
                      m.method.c_str(), m.aupc.count, m.r_all.median, m.r_all.q1, m.r_all.q3, m.r_all.mean,
                      ch.c_str(), m.aupc.mean, m.aupc.median, m.channel_aupc.mean);
        out += line;
    }
    return out;
}

ordered_json summary_json(const EvalSummary& summary, const MetricConfig& metrics, std::uint64_t seed) {
    ordered_json methods = ordered_json::array();
    for (const auto& m : summary.methods) {
        ordered_json j;
        j["method"] = m.method;
        j["r"] = distribution_json(m.r_all);
        ordered_json by = ordered_json::array();
        for (std::size_t f = 0; f < m.r_by_fraction.size(); ++f) {
            auto d = distribution_json(m.r_by_fraction[f]);
            d["fraction"] = f < metrics.fractions.size() ? metrics.fractions[f] : 0.0;
            by.push_back(d);
        }
        j["r_by_fraction"] = by;
        j["channel_r"] = m.channel_r ? distribution_json(*m.channel_r) : ordered_json(nullptr);
        j["aupc"] = distribution_json(m.aupc);
        j["channel_aupc"] = distribution_json(m.channel_aupc);
        j["mean_curve"] = m.mean_curve;
        methods.push_back(j);
    }
    return ordered_json{{"seed", seed}, {"trials", metrics.trials}, {"fractions", metrics.fractions},
                        {"methods", methods}};
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed("synth");
    const auto& out = require_path(cfg.paths.dataset, "--dataset");
    const auto& s = cfg.synth;
    const auto channels = s.channels.empty() ? default_layout().names() : s.channels;
    SynthConfig sc = spindle_vs_emg_config(channels, seed);
    if (!s.classes.empty()) sc.classes = s.classes;
    sc.length = s.length;
    sc.rate = s.rate;
    sc.subjects = s.subjects;
    sc.samples_per_class = s.samples_per_class;
    sc.background_amplitude = s.background_amplitude;
    sc.subject_gain_spread = s.subject_gain_spread;
    const auto data = generate_dataset(sc);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    save_dataset(data, out);
    std::cout << "wrote " << data.samples.size() << " samples (" << data.channels << " x " << data.length << ", "
              << data.classes() << " classes, " << sc.subjects << " subjects) to " << out.string() << "\n";
}

void cmd_train(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed("train");
    const auto& weights = require_path(cfg.paths.weights, "--weights");
    const auto data = read_dataset(cfg);
    Dataset train_set = data;
    std::optional<Dataset> test_set;
    if (cfg.held_out_subject) {
        auto split = split_leave_one_subject_out(data, *cfg.held_out_subject);
        train_set = std::move(split.train);
        test_set = std::move(split.test);
    }
    std::vector<Tensor> xs;
    std::vector<std::size_t> ys;
    for (const auto& s : train_set.samples) {
        xs.push_back(s.data);
        ys.push_back(s.label);
    }
    TrainConfig tc = cfg.training;
    tc.seed = derive_seed(seed, {2});
    const auto result = train(build_model(cfg, data, derive_seed(seed, {1})), xs, ys, tc);

    ordered_json history;
    history["model"] = cfg.model;
    history["seed"] = seed;
    history["train_samples"] = xs.size();
    ordered_json epochs = ordered_json::array();
    for (const auto& e : result.history) {
        epochs.push_back(ordered_json{{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
        std::cout << "epoch " << e.epoch << "  loss " << fixed(e.loss, 4) << "  accuracy " << fixed(e.accuracy, 3)
                  << "\n";
    }
    history["epochs"] = epochs;
    if (test_set) {
        std::vector<Tensor> batch;
        for (const auto& s : test_set->samples) batch.push_back(s.data);
        const auto stats = compute_batch_stats(result.net, batch);
        std::size_t hits = 0;
        for (const auto& s : test_set->samples) hits += predict(result.net, s.data, stats).label == s.label;
        const double acc = static_cast<double>(hits) / static_cast<double>(test_set->samples.size());
        history["held_out_subject"] = *cfg.held_out_subject;
        history["test_samples"] = test_set->samples.size();
        history["test_accuracy"] = acc;
        std::cout << "held-out subject " << *cfg.held_out_subject << "  accuracy " << fixed(acc, 3) << "\n";
    }
    if (weights.has_parent_path()) ensure_dir(weights.parent_path());
    save_weights(result.net, weights);
    auto history_path = weights;
    history_path.replace_extension(".history.json");
    write_text(history_path, history.dump(2) + "\n");
    std::cout << "wrote " << weights.string() << " and " << history_path.string() << "\n";
}

void cmd_attribute(const RunConfig& cfg) {
    const auto data = read_dataset(cfg);
    const auto net = read_weights(cfg, data);
    const auto methods = cfg.method_list();
    const auto stats = reference_stats(net, data, cfg);
    const auto picked = selected_indices(data, cfg);
    ensure_dir(cfg.paths.output);
    for (const auto& name : methods) {
        Dataset maps;
        maps.channels = data.channels;
        maps.length = data.length;
        maps.rate = data.rate;
        maps.channel_names = data.channel_names;
        maps.class_names = data.class_names;
        maps.map_method = name;
        maps.samples.resize(picked.size());
        parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
            const auto& s = data.samples[picked[i]];
            const auto m = compute_map(net, stats, s, name, cfg);
            maps.samples[i] = EEGSample{m.values, s.label, s.subject, s.id, m.target_class};
        });
        const auto path = cfg.paths.output / ("maps_" + name + ".eegd");
        save_dataset(maps, path);
        std::cout << "wrote " << picked.size() << " " << name << " maps to " << path.string() << "\n";
    }
}

void cmd_evaluate(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed("evaluate");
    const auto data = read_dataset(cfg);
    const auto net = read_weights(cfg, data);
    auto methods = cfg.method_list();
    if (std::find(methods.begin(), methods.end(), kRandomMethod) == methods.end()) methods.push_back(kRandomMethod);
    const auto stats = reference_stats(net, data, cfg);
    const auto picked = selected_indices(data, cfg);
    MetricConfig metrics = cfg.metrics;
    metrics.seed = seed;

    std::vector<std::vector<SampleEvaluation>> slots(picked.size());
    parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = data.samples[picked[i]];
        for (const auto& name : methods) {
            const auto map = compute_map(net, stats, s, name, cfg);
            slots[i].push_back(evaluate_map(net, s.data, stats, map, metrics, s.id));
        }
    });

    ensure_dir(cfg.paths.output);
    std::string records;
    std::vector<SampleEvaluation> all;
    for (std::size_t i = 0; i < picked.size(); ++i) {
        for (const auto& ev : slots[i]) {
            records += record_json(ev, data.samples[picked[i]]).dump() + "\n";
            all.push_back(ev);
        }
    }
    write_text(cfg.paths.output / "records.jsonl", records);
    const auto summary = aggregate(all);
    const auto table = summary_table(summary);
    write_text(cfg.paths.output / "summary.txt", table);
    write_text(cfg.paths.output / "summary.json", summary_json(summary, metrics, seed).dump(2) + "\n");
    std::cout << table << "wrote " << all.size() << " records for " << picked.size() << " samples to "
              << cfg.paths.output.string() << "\n";
}

void cmd_render(const RunConfig& cfg) {
    const auto data = read_dataset(cfg);
    const auto net = read_weights(cfg, data);
    const auto stored = read_stored_maps(cfg, data);
    const auto covered = covered_ids(stored);
    const auto methods = stored ? std::vector<std::string>{stored->method} : cfg.method_list();
    const auto layout = (cfg.paths.layout.empty() ? default_layout() : load_layout(cfg.paths.layout))
                            .subset(data.channel_names);
    const auto stats = reference_stats(net, data, cfg);
    const auto picked = selected_indices(data, cfg, stored ? &covered : nullptr);
    ensure_dir(cfg.paths.output);
    parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = data.samples[picked[i]];
        const auto probs = forward(net, s.data, stats).probabilities;
        for (const auto& name : methods) {
            const auto map = stored ? stored_map(*stored, s, cfg) : compute_map(net, stats, s, name, cfg);
            const auto processed = process(map.values, channel_contribution(map).values, cfg.pipeline);
            const auto stem = std::to_string(s.id) + "_" + name;
            const SampleViewInfo info{view_title(data, s, probs, name), data.channel_names};
            write_text(cfg.paths.output / (stem + ".svg"), render_sample_view(s.data, processed, info));
            write_text(cfg.paths.output / (stem + "_topomap.svg"),
                       render_topomap(processed.channel, layout, "Sample " + std::to_string(s.id) + " | " + name));
        }
    });
    std::cout << "wrote " << 2 * picked.size() * methods.size() << " SVG files to " << cfg.paths.output.string()
              << "\n";
}

void cmd_report(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed("report");
    const auto data = read_dataset(cfg);
    const auto net = read_weights(cfg, data);
    const auto stored = read_stored_maps(cfg, data);
    const auto covered = covered_ids(stored);
    const auto methods = stored ? std::vector<std::string>{stored->method} : cfg.method_list();
    const auto stats = reference_stats(net, data, cfg);
    const auto picked = selected_indices(data, cfg, stored ? &covered : nullptr);
    MetricConfig metrics = cfg.metrics;
    metrics.seed = seed;
    ensure_dir(cfg.paths.output);
    parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = data.samples[picked[i]];
        for (const auto& name : methods) {
            const auto map = stored ? stored_map(*stored, s, cfg) : compute_map(net, stats, s, name, cfg);
            const auto processed = process(map.values, channel_contribution(map).values, cfg.pipeline);
            const ReportContext ctx{net.name, std::to_string(s.subject), s.id, s.label, data.channel_names,
                                    data.class_names};
            const auto rep = generate_report(net, stats, s.data, map, processed, cfg.pipeline, metrics, ctx);
            write_text(cfg.paths.output / (std::to_string(s.id) + "_" + name + ".txt"), rep.text());
        }
    });
    std::cout << "wrote " << picked.size() * methods.size() << " reports to " << cfg.paths.output.string() << "\n";
}

}  // namespace eegattr::cli
