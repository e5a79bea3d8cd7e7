#include "eegattr/network.hpp"

#include <utility>

namespace eegattr {

namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::Conv2d, "conv2d"},
    {LayerKind::DepthwiseConv, "depthwise_conv"},
    {LayerKind::SeparableConv, "separable_conv"},
    {LayerKind::PointwiseConv, "pointwise_conv"},
    {LayerKind::BatchNorm, "batch_norm"},
    {LayerKind::Elu, "elu"},
    {LayerKind::Relu, "relu"},
    {LayerKind::AvgPool, "avg_pool"},
    {LayerKind::GlobalAvgPool, "global_avg_pool"},
    {LayerKind::Dropout, "dropout_identity"},
    {LayerKind::Dense, "dense"},
    {LayerKind::Softmax, "softmax"},
};

std::string act_string(const ActShape& s) { return shape_string({s[0], s[1], s[2]}); }

// Output extent of a stride-1 convolution along one axis.
std::size_t conv_extent(const LayerSpec& layer, std::size_t in, std::size_t k, const ActShape& shape) {
    if (layer.padding == Padding::Same) return in;
    if (k > in) {
        throw ShapeError("layer '" + layer.name + "' (" + std::string(to_string(layer.kind)) + "): kernel " +
                         std::to_string(k) + " exceeds input extent " + std::to_string(in) + " of input " +
                         act_string(shape));
    }
    return in - k + 1;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    for (const auto& [k, n] : kKindNames) {
        if (k == kind) return n;
    }
    return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) return k;
    }
    throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv2d(std::string name, std::size_t out, std::size_t kh, std::size_t kw, Padding pad,
                            bool bias) {
    LayerSpec l;
    l.kind = LayerKind::Conv2d;
    l.name = std::move(name);
    l.out_channels = out;
    l.kernel_h = kh;
    l.kernel_w = kw;
    l.padding = pad;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::depthwise(std::string name, std::size_t depth_multiplier, std::size_t kh, std::size_t kw,
                               Padding pad, bool bias) {
    LayerSpec l;
    l.kind = LayerKind::DepthwiseConv;
    l.name = std::move(name);
    l.depth_multiplier = depth_multiplier;
    l.kernel_h = kh;
    l.kernel_w = kw;
    l.padding = pad;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::separable(std::string name, std::size_t out, std::size_t kh, std::size_t kw, Padding pad,
                               bool bias) {
    LayerSpec l;
    l.kind = LayerKind::SeparableConv;
    l.name = std::move(name);
    l.out_channels = out;
    l.kernel_h = kh;
    l.kernel_w = kw;
    l.padding = pad;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::pointwise(std::string name, std::size_t out, bool bias) {
    LayerSpec l;
    l.kind = LayerKind::PointwiseConv;
    l.name = std::move(name);
    l.out_channels = out;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::batch_norm(std::string name) {
    LayerSpec l;
    l.kind = LayerKind::BatchNorm;
    l.name = std::move(name);
    return l;
}

LayerSpec LayerSpec::elu(std::string name, float alpha) {
    LayerSpec l;
    l.kind = LayerKind::Elu;
    l.name = std::move(name);
    l.alpha = alpha;
    return l;
}

LayerSpec LayerSpec::relu(std::string name) {
    LayerSpec l;
    l.kind = LayerKind::Relu;
    l.name = std::move(name);
    return l;
}

LayerSpec LayerSpec::avg_pool(std::string name, std::size_t ph, std::size_t pw) {
    LayerSpec l;
    l.kind = LayerKind::AvgPool;
    l.name = std::move(name);
    l.pool_h = ph;
    l.pool_w = pw;
    return l;
}

LayerSpec LayerSpec::global_avg_pool(std::string name) {
    LayerSpec l;
    l.kind = LayerKind::GlobalAvgPool;
    l.name = std::move(name);
    return l;
}

LayerSpec LayerSpec::dropout(std::string name, float rate) {
    LayerSpec l;
    l.kind = LayerKind::Dropout;
    l.name = std::move(name);
    l.rate = rate;
    return l;
}

LayerSpec LayerSpec::dense(std::string name, std::size_t out, bool bias) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.name = std::move(name);
    l.out_channels = out;
    l.has_bias = bias;
    return l;
}

LayerSpec LayerSpec::softmax(std::string name) {
    LayerSpec l;
    l.kind = LayerKind::Softmax;
    l.name = std::move(name);
    return l;
}

std::vector<std::string> LayerSpec::param_names() const {
    std::vector<std::string> names;
    switch (kind) {
        case LayerKind::Conv2d:
        case LayerKind::DepthwiseConv:
        case LayerKind::PointwiseConv:
        case LayerKind::Dense:
            names = {"weight"};
            break;
        case LayerKind::SeparableConv:
            names = {"depthwise", "pointwise"};
            break;
        case LayerKind::BatchNorm:
            return {"gamma", "beta"};
        default:
            return {};
    }
    if (has_bias) names.emplace_back("bias");
    return names;
}

ActShape LayerSpec::output_shape(const ActShape& in) const {
    const auto [c, h, w] = in;
    auto fail = [&](const std::string& why) -> ShapeError {
        return ShapeError("layer '" + name + "' (" + std::string(to_string(kind)) + "): " + why + " for input " +
                          act_string(in));
    };
    switch (kind) {
        case LayerKind::Conv2d:
            if (out_channels == 0) throw fail("zero output channels");
            return {out_channels, conv_extent(*this, h, kernel_h, in), conv_extent(*this, w, kernel_w, in)};
        case LayerKind::DepthwiseConv:
            if (depth_multiplier == 0) throw fail("zero depth multiplier");
            return {c * depth_multiplier, conv_extent(*this, h, kernel_h, in), conv_extent(*this, w, kernel_w, in)};
        case LayerKind::SeparableConv:
            if (out_channels == 0) throw fail("zero output channels");
            return {out_channels, conv_extent(*this, h, kernel_h, in), conv_extent(*this, w, kernel_w, in)};
        case LayerKind::PointwiseConv:
            if (out_channels == 0) throw fail("zero output channels");
            return {out_channels, h, w};
        case LayerKind::AvgPool:
            if (pool_h == 0 || pool_w == 0) throw fail("zero pool size");
            if (h < pool_h || w < pool_w) {
                throw fail("pool " + std::to_string(pool_h) + "x" + std::to_string(pool_w) + " larger than input");
            }
            return {c, h / pool_h, w / pool_w};
        case LayerKind::GlobalAvgPool:
            return {c, 1, 1};
        case LayerKind::Dense:
            if (out_channels == 0) throw fail("zero output units");
            return {out_channels, 1, 1};
        case LayerKind::Softmax:
            if (h != 1 || w != 1) throw fail("softmax expects a flat [K,1,1] input");
            return in;
        case LayerKind::BatchNorm:
        case LayerKind::Elu:
        case LayerKind::Relu:
        case LayerKind::Dropout:
            return in;
    }
    throw fail("unhandled kind");
}

std::vector<Shape> LayerSpec::expected_param_shapes(const ActShape& in) const {
    const std::size_t c = in[0];
    std::vector<Shape> shapes;
    switch (kind) {
        case LayerKind::Conv2d:
            shapes = {{out_channels, c, kernel_h, kernel_w}};
            break;
        case LayerKind::DepthwiseConv:
            shapes = {{c * depth_multiplier, 1, kernel_h, kernel_w}};
            break;
        case LayerKind::SeparableConv:
            shapes = {{c, 1, kernel_h, kernel_w}, {out_channels, c, 1, 1}};
            break;
        case LayerKind::PointwiseConv:
            shapes = {{out_channels, c, 1, 1}};
            break;
        case LayerKind::Dense:
            shapes = {{out_channels, in[0] * in[1] * in[2]}};
            break;
        case LayerKind::BatchNorm:
            return {{c}, {c}};
        default:
            return {};
    }
    const ActShape out = output_shape(in);
    if (has_bias) shapes.push_back({out[0]});
    return shapes;
}

std::vector<ActShape> NetworkSpec::shape_chain() const {
    std::vector<ActShape> chain;
    chain.reserve(layers.size() + 1);
    chain.push_back(input_shape());
    for (const auto& layer : layers) chain.push_back(layer.output_shape(chain.back()));
    return chain;
}

void NetworkSpec::validate() const {
    if (channels == 0 || length == 0) throw ShapeError("network '" + name + "': empty input shape");
    if (classes == 0) throw ShapeError("network '" + name + "': zero classes");
    const auto chain = shape_chain();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        const auto expected = layer.expected_param_shapes(chain[i]);
        if (layer.params.size() != expected.size()) {
            throw ShapeError("layer '" + layer.name + "': expected " + std::to_string(expected.size()) +
                             " parameter tensors, has " + std::to_string(layer.params.size()));
        }
        for (std::size_t p = 0; p < expected.size(); ++p) {
            if (layer.params[p].shape() != expected[p]) {
                throw ShapeError("layer '" + layer.name + "': parameter '" + layer.param_names()[p] + "' has shape " +
                                 shape_string(layer.params[p].shape()) + ", expected " + shape_string(expected[p]));
            }
        }
        if (layer.kind == LayerKind::Softmax && i + 1 != layers.size()) {
            throw ShapeError("layer '" + layer.name + "': softmax must be the last layer");
        }
    }
    const auto& out = chain.back();
    if (out[0] != classes || out[1] != 1 || out[2] != 1) {
        throw ShapeError("network '" + name + "': output shape " + act_string(out) + " does not match " +
                         std::to_string(classes) + " classes");
    }
}

std::size_t NetworkSpec::batch_norm_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.kind == LayerKind::BatchNorm;
    return n;
}

std::size_t NetworkSpec::nonlinearity_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.is_nonlinearity();
    return n;
}

std::size_t NetworkSpec::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        for (const auto& p : l.params) n += p.size();
    }
    return n;
}

}  // namespace eegattr
