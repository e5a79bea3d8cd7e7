#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "eegattr/tensor.hpp"

namespace eegattr {

enum class LayerKind {
    Conv2d,
    DepthwiseConv,
    SeparableConv,
    PointwiseConv,
    BatchNorm,
    Elu,
    Relu,
    AvgPool,
    GlobalAvgPool,
    Dropout,
    Dense,
    Softmax,
};

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

enum class Padding { Valid, Same };

/// Activations are [channels, height, width]; the EEG input N x T enters as [1, N, T].
using ActShape = std::array<std::size_t, 3>;

/// One layer: kind, hyperparameters and parameter tensors.
///
/// Parameter layouts:
///   conv2d / pointwise_conv:  weight [out, in, kh, kw], bias [out] (optional)
///   depthwise_conv:           weight [in*D, 1, kh, kw]; output o reads input o / D
///   separable_conv:           depthwise [in, 1, kh, kw], pointwise [out, in, 1, 1], bias [out] (optional)
///   batch_norm:               gamma [C], beta [C]
///   dense:                    weight [K, in], bias [K] (optional)
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::string name;

    std::size_t out_channels = 0;
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t depth_multiplier = 1;
    Padding padding = Padding::Valid;
    std::size_t pool_h = 1;
    std::size_t pool_w = 1;
    float rate = 0.0f;   // dropout
    float alpha = 1.0f;  // elu
    bool has_bias = false;

    std::vector<Tensor> params;

    static LayerSpec conv2d(std::string name, std::size_t out, std::size_t kh, std::size_t kw, Padding pad,
                            bool bias);
    static LayerSpec depthwise(std::string name, std::size_t depth_multiplier, std::size_t kh, std::size_t kw,
                               Padding pad, bool bias);
    static LayerSpec separable(std::string name, std::size_t out, std::size_t kh, std::size_t kw, Padding pad,
                               bool bias);
    static LayerSpec pointwise(std::string name, std::size_t out, bool bias);
    static LayerSpec batch_norm(std::string name);
    static LayerSpec elu(std::string name, float alpha = 1.0f);
    static LayerSpec relu(std::string name);
    static LayerSpec avg_pool(std::string name, std::size_t ph, std::size_t pw);
    static LayerSpec global_avg_pool(std::string name);
    static LayerSpec dropout(std::string name, float rate);
    static LayerSpec dense(std::string name, std::size_t out, bool bias = true);
    static LayerSpec softmax(std::string name);

    bool is_nonlinearity() const { return kind == LayerKind::Elu || kind == LayerKind::Relu; }

    /// Names of the parameter tensors, in storage order.
    std::vector<std::string> param_names() const;

    /// Output shape for a given input shape; throws ShapeError naming the layer.
    ActShape output_shape(const ActShape& in) const;

    /// Parameter shapes implied by the hyperparameters and the input shape.
    std::vector<Shape> expected_param_shapes(const ActShape& in) const;
};

/// Ordered layer list for an N x T input and K classes.
struct NetworkSpec {
    std::string name;
    std::size_t channels = 0;  // N
    std::size_t length = 0;    // T
    std::size_t classes = 0;   // K
    std::vector<LayerSpec> layers;
    /// Builder hyperparameters, persisted with the weights.
    std::map<std::string, std::string> hyper;

    ActShape input_shape() const { return {1, channels, length}; }

    /// Shape after every layer (size layers+1, starting with the input).
    /// Throws ShapeError naming the first inconsistent layer.
    std::vector<ActShape> shape_chain() const;

    /// Full consistency check: shape chain, parameter shapes, output == K.
    void validate() const;

    std::size_t batch_norm_count() const;
    std::size_t nonlinearity_count() const;
    std::size_t parameter_count() const;
};

}  // namespace eegattr
