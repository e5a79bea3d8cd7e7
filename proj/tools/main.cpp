#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "commands.hpp"
#include "eegattr/error.hpp"
#include "json.hpp"

using namespace eegattr;
using namespace eegattr::cli;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Command-line values; set ones override the config file.
struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> dataset, weights, layout, maps, output, model, methods, ids, fractions, channels;
    std::optional<std::size_t> subject, limit, jobs, trials, window, epochs, batch_size, held_out, ig_steps;
    std::optional<std::size_t> subjects, samples_per_class, length;
    std::optional<double> sample_threshold, channel_threshold, learning_rate;
};

void add_common(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd.add_option("--seed", f.seed, "Seed for every random choice");
    cmd.add_option("--output", f.output, "Output directory");
}

void add_dataset(CLI::App& cmd, Flags& f) { cmd.add_option("--dataset", f.dataset, "Dataset file"); }

void add_inference(CLI::App& cmd, Flags& f) {
    add_dataset(cmd, f);
    cmd.add_option("--weights", f.weights, "Weights file");
    cmd.add_option("--methods", f.methods, "Comma-separated attribution methods (default: all seven)");
    cmd.add_option("--subject", f.subject, "Use only this subject's samples");
    cmd.add_option("--ids", f.ids, "Comma-separated sample ids");
    cmd.add_option("--limit", f.limit, "At most this many samples");
    cmd.add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
    cmd.add_option("--ig-steps", f.ig_steps, "Integrated-gradients steps")->check(CLI::PositiveNumber);
}

void add_pipeline(CLI::App& cmd, Flags& f) {
    cmd.add_option("--sample-threshold", f.sample_threshold, "Sample map threshold");
    cmd.add_option("--channel-threshold", f.channel_threshold, "Channel map threshold");
    cmd.add_option("--window", f.window, "Smoothing window (odd)");
}

void add_metrics(CLI::App& cmd, Flags& f) {
    cmd.add_option("--trials", f.trials, "Perturbations per patch fraction");
    cmd.add_option("--fractions", f.fractions, "Comma-separated patch fractions");
}

std::vector<std::size_t> parse_ids(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(text)) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
            throw UsageError("--ids: '" + item + "' is not a sample id");
        }
    }
    return out;
}

RunConfig resolve(const Flags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (f.seed) cfg.seed = f.seed;
    if (f.dataset) cfg.paths.dataset = *f.dataset;
    if (f.weights) cfg.paths.weights = *f.weights;
    if (f.layout) cfg.paths.layout = *f.layout;
    if (f.maps) cfg.paths.maps = *f.maps;
    if (f.output) cfg.paths.output = *f.output;
    if (f.model) {
        check_model_name(*f.model);
        cfg.model = *f.model;
    }
    if (f.methods) {
        cfg.methods = split_list(*f.methods);
        for (const auto& m : cfg.methods) check_method_name(m);
    }
    if (f.subject) cfg.samples.subject = f.subject;
    if (f.ids) cfg.samples.ids = parse_ids(*f.ids);
    if (f.limit) cfg.samples.limit = f.limit;
    if (f.jobs) cfg.jobs = *f.jobs;
    if (f.trials) cfg.metrics.trials = *f.trials;
    if (f.fractions) cfg.metrics.fractions = parse_fractions(*f.fractions);
    if (f.window) cfg.pipeline.smoothing_window = *f.window;
    if (f.sample_threshold) cfg.pipeline.sample_threshold = *f.sample_threshold;
    if (f.channel_threshold) cfg.pipeline.channel_threshold = *f.channel_threshold;
    if (f.epochs) cfg.training.epochs = *f.epochs;
    if (f.batch_size) cfg.training.batch_size = *f.batch_size;
    if (f.learning_rate) cfg.training.learning_rate = *f.learning_rate;
    if (f.held_out) cfg.held_out_subject = f.held_out;
    if (f.ig_steps) cfg.method_settings.ig_steps = *f.ig_steps;
    if (f.channels) cfg.synth.channels = split_list(*f.channels);
    if (f.subjects) cfg.synth.subjects = *f.subjects;
    if (f.samples_per_class) cfg.synth.samples_per_class = *f.samples_per_class;
    if (f.length) cfg.synth.length = *f.length;
    if (cfg.jobs == 0) throw UsageError("jobs must be at least 1");
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attribution, evaluation and reporting for EEG classifiers"};
    app.require_subcommand(1);
    Flags f;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    add_common(*synth, f);
    add_dataset(*synth, f);
    synth->add_option("--channels", f.channels, "Comma-separated channel names (default: 30-channel montage)");
    synth->add_option("--subjects", f.subjects, "Number of subjects");
    synth->add_option("--samples-per-class", f.samples_per_class, "Samples per class and subject");
    synth->add_option("--length", f.length, "Samples per channel");

    auto* train = app.add_subcommand("train", "Train a model and write its weights");
    add_common(*train, f);
    add_dataset(*train, f);
    train->add_option("--weights", f.weights, "Weights file to write");
    train->add_option("--model", f.model, "eegnet or interpretable_cnn");
    train->add_option("--epochs", f.epochs, "Training epochs");
    train->add_option("--batch-size", f.batch_size, "Mini-batch size");
    train->add_option("--learning-rate", f.learning_rate, "Adam step size");
    train->add_option("--held-out", f.held_out, "Leave this subject out and report its accuracy");

    auto* attribute = app.add_subcommand("attribute", "Write contribution maps");
    add_common(*attribute, f);
    add_inference(*attribute, f);

    auto* evaluate = app.add_subcommand("evaluate", "Score maps with perturbation and deletion tests");
    add_common(*evaluate, f);
    add_inference(*evaluate, f);
    add_metrics(*evaluate, f);

    auto* render = app.add_subcommand("render", "Write sample views and topographic maps");
    add_common(*render, f);
    add_inference(*render, f);
    add_pipeline(*render, f);
    render->add_option("--layout", f.layout, "Electrode layout file (default: bundled montage)");
    render->add_option("--maps", f.maps, "Use maps written by 'attribute'");

    auto* report = app.add_subcommand("report", "Write per-sample text reports");
    add_common(*report, f);
    add_inference(*report, f);
    add_pipeline(*report, f);
    add_metrics(*report, f);
    report->add_option("--maps", f.maps, "Use maps written by 'attribute'");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        const RunConfig cfg = resolve(f);
        if (synth->parsed()) cmd_synth(cfg);
        if (train->parsed()) cmd_train(cfg);
        if (attribute->parsed()) cmd_attribute(cfg);
        if (evaluate->parsed()) cmd_evaluate(cfg);
        if (render->parsed()) cmd_render(cfg);
        if (report->parsed()) cmd_report(cfg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const eegattr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
