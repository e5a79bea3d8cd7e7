#include "eegattr/weights_io.hpp"

#include "container.hpp"
#include "eegattr/models.hpp"

namespace eegattr {

namespace {

constexpr const char* kMagic = "EEGATTR-WEIGHTS";

nlohmann::ordered_json layer_to_json(const LayerSpec& l) {
    nlohmann::ordered_json j;
    j["name"] = l.name;
    j["kind"] = std::string(to_string(l.kind));
    j["out_channels"] = l.out_channels;
    j["kernel"] = {l.kernel_h, l.kernel_w};
    j["depth_multiplier"] = l.depth_multiplier;
    j["padding"] = l.padding == Padding::Same ? "same" : "valid";
    j["pool"] = {l.pool_h, l.pool_w};
    j["rate"] = l.rate;
    j["alpha"] = l.alpha;
    j["bias"] = l.has_bias;
    return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerSpec l;
    l.name = j.at("name").get<std::string>();
    l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
    l.out_channels = j.at("out_channels").get<std::size_t>();
    l.kernel_h = j.at("kernel").at(0).get<std::size_t>();
    l.kernel_w = j.at("kernel").at(1).get<std::size_t>();
    l.depth_multiplier = j.at("depth_multiplier").get<std::size_t>();
    const auto pad = j.at("padding").get<std::string>();
    if (pad != "same" && pad != "valid") throw FormatError("layer '" + l.name + "': unknown padding '" + pad + "'");
    l.padding = pad == "same" ? Padding::Same : Padding::Valid;
    l.pool_h = j.at("pool").at(0).get<std::size_t>();
    l.pool_w = j.at("pool").at(1).get<std::size_t>();
    l.rate = j.at("rate").get<float>();
    l.alpha = j.at("alpha").get<float>();
    l.has_bias = j.at("bias").get<bool>();
    return l;
}

bool is_io_key(const std::string& k) { return k == "channels" || k == "length" || k == "classes"; }

}  // namespace

void save_weights(const NetworkSpec& net, const std::filesystem::path& path) {
    net.validate();
    nlohmann::ordered_json m;
    m["format"] = "eegattr-weights";
    m["version"] = detail::kFormatVersion;
    m["architecture"] = net.name;
    m["channels"] = net.channels;
    m["length"] = net.length;
    m["classes"] = net.classes;
    nlohmann::ordered_json hyper = nlohmann::ordered_json::object();
    for (const auto& [k, v] : net.hyper) {
        if (!is_io_key(k)) hyper[k] = v;
    }
    m["hyper"] = hyper;
    m["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : net.layers) m["layers"].push_back(layer_to_json(l));

    std::vector<std::uint8_t> blob;
    m["tensors"] = nlohmann::ordered_json::array();
    for (const auto& l : net.layers) {
        const auto names = l.param_names();
        for (std::size_t p = 0; p < l.params.size(); ++p) {
            nlohmann::ordered_json t;
            t["name"] = l.name + "." + names[p];
            t["shape"] = l.params[p].shape();
            t["offset"] = blob.size();
            m["tensors"].push_back(t);
            detail::append_floats(blob, l.params[p].values());
        }
    }
    detail::write_container(path, kMagic, std::move(m), blob);
}

NetworkSpec load_weights(const std::filesystem::path& path) {
    const auto c = detail::read_container(path, kMagic);
    const auto& m = c.manifest;
    const std::string where = "'" + path.string() + "': ";
    NetworkSpec net;
    std::vector<std::pair<std::string, Shape>> stored;
    std::vector<std::size_t> offsets;
    try {
        const auto arch = m.at("architecture").get<std::string>();
        std::map<std::string, std::string> hyper;
        for (const auto& [k, v] : m.at("hyper").items()) hyper[k] = v.get<std::string>();
        hyper["channels"] = std::to_string(m.at("channels").get<std::size_t>());
        hyper["length"] = std::to_string(m.at("length").get<std::size_t>());
        hyper["classes"] = std::to_string(m.at("classes").get<std::size_t>());
        for (const auto& t : m.at("tensors")) {
            stored.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<Shape>());
            offsets.push_back(t.at("offset").get<std::size_t>());
        }
        if (arch == "eegnet" || arch == "interpretable_cnn") {
            try {
                net = build_from_hyper(arch, hyper);
            } catch (const ValidationError& e) {
                throw ShapeMismatchError(where + e.what());
            }
        } else {
            net.name = arch;
            net.channels = m.at("channels").get<std::size_t>();
            net.length = m.at("length").get<std::size_t>();
            net.classes = m.at("classes").get<std::size_t>();
            net.hyper = hyper;
            for (const auto& lj : m.at("layers")) net.layers.push_back(layer_from_json(lj));
            std::size_t k = 0;
            for (auto& l : net.layers) {
                for (std::size_t p = 0; p < l.param_names().size(); ++p, ++k) {
                    if (k >= stored.size()) throw ShapeMismatchError(where + "fewer tensors than layer parameters");
                    l.params.emplace_back(stored[k].second);
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(where + "malformed manifest: " + e.what());
    }

    std::size_t k = 0;
    for (auto& l : net.layers) {
        const auto names = l.param_names();
        for (std::size_t p = 0; p < l.params.size(); ++p, ++k) {
            const std::string expected_name = l.name + "." + names[p];
            if (k >= stored.size() || stored[k].first != expected_name) {
                throw ShapeMismatchError(where + "expected tensor '" + expected_name + "' at position " +
                                         std::to_string(k));
            }
            if (stored[k].second != l.params[p].shape()) {
                throw ShapeMismatchError(where + "tensor '" + expected_name + "' has shape " +
                                         shape_string(stored[k].second) + ", architecture expects " +
                                         shape_string(l.params[p].shape()));
            }
            l.params[p] = Tensor(stored[k].second, detail::read_floats(c.blob, offsets[k], l.params[p].size()));
        }
    }
    if (k != stored.size()) throw ShapeMismatchError(where + "file holds more tensors than the architecture");
    try {
        net.validate();
    } catch (const ShapeError& e) {
        throw ShapeMismatchError(where + e.what());
    }
    return net;
}

}  // namespace eegattr
