#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "eegattr/attribution.hpp"
#include "eegattr/error.hpp"
#include "json.hpp"

namespace eegattr::cli {

namespace {

using nlohmann::json;

class Reader {
public:
    Reader(const json& node, std::string where) : node_(node), where_(std::move(where)) {
        if (!node_.is_object()) fail("expected an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& [key, value] : node_.items()) {
            if (!known.count(key)) throw ValidationError(where_ + "." + key + ": unknown key");
        }
    }

    bool has(const char* key) const { return node_.contains(key) && !node_.at(key).is_null(); }
    const json& at(const char* key) const { return node_.at(key); }
    std::string path(const char* key) const { return where_ + "." + key; }

    template <class T>
    void get(const char* key, T& out) const {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected true or false");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "expected a number");
            out = v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "expected a string");
            out = v.get<std::string>();
        } else {
            static_assert(sizeof(T) == 0, "unsupported config type");
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) const {
        if (!has(key)) return;
        T value{};
        get(key, value);
        out = value;
    }

    template <class T>
    void get_list(const char* key, std::vector<T>& out) const {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_array()) fail(key, "expected a list");
        std::vector<T> items;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const json wrapped = json::object({{"item", v[i]}});
            T item{};
            Reader(wrapped, path(key) + "[" + std::to_string(i) + "]").get("item", item);
            items.push_back(item);
        }
        out = std::move(items);
    }

    [[noreturn]] void fail(const std::string& message) const { throw ValidationError(where_ + ": " + message); }
    [[noreturn]] void fail(const char* key, const std::string& message) const {
        throw ValidationError(path(key) + ": " + message);
    }

private:
    const json& node_;
    std::string where_;
};

FeatureSpec parse_feature(const json& node, const std::string& where) {
    const Reader r(node, where);
    r.allow({"kind", "amplitude", "freq_low", "freq_high", "duration", "latency", "channels"});
    if (!r.has("kind")) r.fail("missing 'kind'");
    std::string kind;
    r.get("kind", kind);
    FeatureSpec f;
    try {
        f = FeatureSpec::defaults(feature_kind_from_string(kind));
    } catch (const ValidationError& e) {
        r.fail("kind", e.what());
    }
    r.get("amplitude", f.amplitude);
    r.get("freq_low", f.freq_low);
    r.get("freq_high", f.freq_high);
    r.get("duration", f.duration);
    if (r.has("latency")) {
        if (!r.at("latency").is_number()) r.fail("latency", "expected a number");
        f.latency = r.at("latency").get<double>();
    }
    r.get_list("channels", f.channels);
    return f;
}

void parse_synth(const Reader& r, SynthSettings& s) {
    r.allow({"channels", "length", "rate", "subjects", "samples_per_class", "background_amplitude",
             "subject_gain_spread", "classes"});
    r.get_list("channels", s.channels);
    r.get("length", s.length);
    r.get("rate", s.rate);
    r.get("subjects", s.subjects);
    r.get("samples_per_class", s.samples_per_class);
    r.get("background_amplitude", s.background_amplitude);
    r.get("subject_gain_spread", s.subject_gain_spread);
    if (r.has("classes")) {
        const json& list = r.at("classes");
        if (!list.is_array()) r.fail("classes", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = r.path("classes") + "[" + std::to_string(i) + "]";
            const Reader c(list[i], where);
            c.allow({"name", "features"});
            ClassSpec spec;
            c.get("name", spec.name);
            if (c.has("features")) {
                const json& fs = c.at("features");
                if (!fs.is_array()) c.fail("features", "expected a list");
                for (std::size_t k = 0; k < fs.size(); ++k) {
                    spec.features.push_back(parse_feature(fs[k], where + ".features[" + std::to_string(k) + "]"));
                }
            }
            s.classes.push_back(std::move(spec));
        }
    }
}

void parse_model_options(const Reader& r, std::map<std::string, std::string>& out) {
    for (const auto& [key, value] : r.at("model_options").items()) {
        if (!value.is_number()) r.fail("model_options", "'" + key + "' must be a number");
        out[key] = value.is_number_float() ? nlohmann::json(value.get<double>()).dump() : value.dump();
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& text) {
    const std::filesystem::path p(text);
    return p.is_absolute() ? p : base / p;
}

}  // namespace

std::uint64_t RunConfig::require_seed(const std::string& command) const {
    if (!seed) throw UsageError(command + ": a seed is required (--seed or \"seed\" in the config file)");
    return *seed;
}

void check_method_name(const std::string& name) {
    if (name == kRandomMethod) return;
    const auto& names = method_names();
    if (std::find(names.begin(), names.end(), name) != names.end()) return;
    std::string list;
    for (const auto& n : names) list += n + ", ";
    throw UsageError("unknown method '" + name + "'; expected one of: " + list + kRandomMethod);
}

void check_model_name(const std::string& name) {
    if (name != "eegnet" && name != "interpretable_cnn") {
        throw UsageError("unknown model '" + name + "'; expected one of: eegnet, interpretable_cnn");
    }
}

std::vector<std::string> RunConfig::method_list() const {
    std::vector<std::string> out = methods.empty() ? method_names() : methods;
    for (const auto& m : out) check_method_name(m);
    return out;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path.string() + ": cannot open config file");
    std::stringstream text;
    text << in.rdbuf();
    json root;
    try {
        root = json::parse(text.str());
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const std::string name = path.filename().string();
    const auto base = path.parent_path();
    RunConfig cfg;
    const Reader r(root, name);
    r.allow({"seed", "model", "model_options", "methods", "method_options", "pipeline", "metrics", "training",
             "synth", "samples", "paths", "jobs"});
    r.get("seed", cfg.seed);
    r.get("model", cfg.model);
    check_model_name(cfg.model);
    if (r.has("model_options")) parse_model_options(r, cfg.model_options);
    r.get_list("methods", cfg.methods);
    for (const auto& m : cfg.methods) check_method_name(m);
    r.get("jobs", cfg.jobs);

    if (r.has("method_options")) {
        const Reader m(r.at("method_options"), r.path("method_options"));
        m.allow({"ig_steps", "lrp_epsilon", "deeplift_delta"});
        m.get("ig_steps", cfg.method_settings.ig_steps);
        m.get("lrp_epsilon", cfg.method_settings.lrp_epsilon);
        m.get("deeplift_delta", cfg.method_settings.deeplift_delta);
    }
    if (r.has("pipeline")) {
        const Reader p(r.at("pipeline"), r.path("pipeline"));
        p.allow({"sample_threshold", "channel_threshold", "smoothing_window"});
        p.get("sample_threshold", cfg.pipeline.sample_threshold);
        p.get("channel_threshold", cfg.pipeline.channel_threshold);
        p.get("smoothing_window", cfg.pipeline.smoothing_window);
    }
    if (r.has("metrics")) {
        const Reader m(r.at("metrics"), r.path("metrics"));
        m.allow({"fractions", "trials", "channel_deletion"});
        m.get_list("fractions", cfg.metrics.fractions);
        m.get("trials", cfg.metrics.trials);
        if (m.has("channel_deletion")) {
            std::string mode;
            m.get("channel_deletion", mode);
            if (mode == "cumulative") {
                cfg.metrics.channel_mode = ChannelDeletionMode::Cumulative;
            } else if (mode == "independent") {
                cfg.metrics.channel_mode = ChannelDeletionMode::Independent;
            } else {
                m.fail("channel_deletion", "expected 'cumulative' or 'independent'");
            }
        }
    }
    if (r.has("training")) {
        const Reader t(r.at("training"), r.path("training"));
        t.allow({"epochs", "batch_size", "learning_rate", "class_weights", "held_out_subject"});
        t.get("epochs", cfg.training.epochs);
        t.get("batch_size", cfg.training.batch_size);
        t.get("learning_rate", cfg.training.learning_rate);
        t.get_list("class_weights", cfg.training.class_weights);
        t.get("held_out_subject", cfg.held_out_subject);
    }
    if (r.has("synth")) parse_synth(Reader(r.at("synth"), r.path("synth")), cfg.synth);
    if (r.has("samples")) {
        const Reader s(r.at("samples"), r.path("samples"));
        s.allow({"subject", "ids", "limit"});
        s.get("subject", cfg.samples.subject);
        s.get_list("ids", cfg.samples.ids);
        s.get("limit", cfg.samples.limit);
    }
    if (r.has("paths")) {
        const Reader p(r.at("paths"), r.path("paths"));
        p.allow({"dataset", "weights", "layout", "maps", "output"});
        auto path_of = [&](const char* key, std::filesystem::path& out) {
            if (!p.has(key)) return;
            std::string v;
            p.get(key, v);
            out = resolve(base, v);
        };
        path_of("dataset", cfg.paths.dataset);
        path_of("weights", cfg.paths.weights);
        path_of("layout", cfg.paths.layout);
        path_of("maps", cfg.paths.maps);
        path_of("output", cfg.paths.output);
    }
    return cfg;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::vector<double> parse_fractions(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size() || !(v > 0.0 && v <= 1.0)) {
            throw UsageError("--fractions: '" + item + "' is not a fraction in (0, 1]");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError("--fractions: empty list");
    return out;
}

}  // namespace eegattr::cli
