#include "eegattr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "batch_pass.hpp"
#include "eegattr/models.hpp"
#include "eegattr/rng.hpp"

namespace eegattr {

namespace {

std::vector<double> effective_weights(const TrainConfig& config, std::size_t classes) {
    if (config.class_weights.empty()) return std::vector<double>(classes, 1.0);
    return config.class_weights;
}

std::size_t logit_layer_end(const NetworkSpec& net) {
    if (!net.layers.empty() && net.layers.back().kind == LayerKind::Softmax) return net.layers.size() - 1;
    return net.layers.size();
}

struct LossAndGrad {
    double loss = 0.0;
    std::size_t correct = 0;
    std::vector<std::vector<float>> dlogits;
};

// Weighted mean cross-entropy over the batch and its gradient w.r.t. logits.
LossAndGrad weighted_cross_entropy(const NetworkSpec& net, const detail::BatchPass& pass,
                                   std::span<const std::size_t> labels, std::span<const double> weights) {
    const auto& logits = pass.acts[logit_layer_end(net)];
    LossAndGrad out;
    out.dlogits.resize(logits.size());
    double weight_sum = 0.0;
    for (std::size_t s = 0; s < logits.size(); ++s) weight_sum += weights[labels[s]];
    for (std::size_t s = 0; s < logits.size(); ++s) {
        const auto& z = logits[s];
        const std::size_t y = labels[s];
        double m = z[0];
        for (std::size_t k = 1; k < z.size(); ++k) m = std::max(m, static_cast<double>(z[k]));
        double sum = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) sum += std::exp(z[k] - m);
        const double log_norm = m + std::log(sum);
        const double w = weights[y] / weight_sum;
        out.loss += w * (log_norm - z[y]);
        out.dlogits[s].resize(z.size());
        std::size_t best = 0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            const double p = std::exp(z[k] - log_norm);
            out.dlogits[s][k] = static_cast<float>(w * (p - (k == y ? 1.0 : 0.0)));
            if (z[k] > z[best]) best = k;
        }
        out.correct += best == y;
    }
    return out;
}

}  // namespace

void TrainConfig::validate(std::size_t classes) const {
    if (batch_size == 0) throw ValidationError("train: batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ValidationError("train: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("train: beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("train: beta2 must lie in [0, 1)");
    if (!class_weights.empty()) {
        if (class_weights.size() != classes) {
            throw ValidationError("train: " + std::to_string(class_weights.size()) + " class weights for " +
                                  std::to_string(classes) + " classes");
        }
        for (double w : class_weights) {
            if (!(w > 0.0)) throw ValidationError("train: class weights must be positive");
        }
    }
}

double batch_loss(const NetworkSpec& net, std::span<const Tensor> samples, std::span<const std::size_t> labels,
                  std::span<const double> class_weights) {
    if (samples.size() != labels.size()) throw ValidationError("batch_loss: samples and labels differ in length");
    if (samples.empty()) throw ValidationError("batch_loss: empty batch");
    const std::vector<double> ones(net.classes, 1.0);
    if (class_weights.empty()) class_weights = ones;
    if (class_weights.size() != net.classes) {
        throw ValidationError("batch_loss: " + std::to_string(class_weights.size()) + " class weights for " +
                              std::to_string(net.classes) + " classes");
    }
    for (std::size_t y : labels) {
        if (y >= net.classes) throw ValidationError("batch_loss: label " + std::to_string(y) + " out of range");
    }
    const auto pass = detail::batch_forward(net, samples, false, 0);
    return weighted_cross_entropy(net, pass, labels, class_weights).loss;
}

TrainResult train(const NetworkSpec& initial, std::span<const Tensor> samples, std::span<const std::size_t> labels,
                  const TrainConfig& config) {
    config.validate(initial.classes);
    if (samples.size() != labels.size()) throw ValidationError("train: samples and labels differ in length");
    for (std::size_t y : labels) {
        if (y >= initial.classes) {
            throw ValidationError("train: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(initial.classes) + ")");
        }
    }
    TrainResult result{initial, {}};
    if (config.epochs == 0 || samples.empty()) return result;

    NetworkSpec& net = result.net;
    const auto weights = effective_weights(config, net.classes);

    // Adam moments, laid out like the parameters.
    std::vector<std::vector<Tensor>> m1, m2, grads;
    for (const auto& layer : net.layers) {
        std::vector<Tensor> a, b;
        for (const auto& p : layer.params) {
            a.emplace_back(p.shape(), 0.0f);
            b.emplace_back(p.shape(), 0.0f);
        }
        m1.push_back(a);
        m2.push_back(b);
        grads.push_back(std::move(a));
    }

    std::vector<std::size_t> order(samples.size());
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        CounterRng shuffle_rng(derive_seed(config.seed, {0x5348554646ULL, epoch}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::vector<Tensor> xs;
            std::vector<std::size_t> ys;
            for (std::size_t i = start; i < stop; ++i) {
                xs.push_back(samples[order[i]]);
                ys.push_back(labels[order[i]]);
            }
            const auto pass = detail::batch_forward(net, xs, true, derive_seed(config.seed, {epoch, batch_index}));
            auto lg = weighted_cross_entropy(net, pass, ys, weights);
            if (!std::isfinite(lg.loss)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            }
            epoch_loss += lg.loss * static_cast<double>(xs.size());
            epoch_correct += lg.correct;

            for (auto& layer_grads : grads) {
                for (auto& g : layer_grads) g.fill(0.0f);
            }
            detail::batch_backward(net, pass, std::move(lg.dlogits), grads);

            ++step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                for (std::size_t p = 0; p < net.layers[l].params.size(); ++p) {
                    auto& param = net.layers[l].params[p];
                    auto& a = m1[l][p];
                    auto& b = m2[l][p];
                    const auto& g = grads[l][p];
                    for (std::size_t k = 0; k < param.size(); ++k) {
                        const double gk = g[k];
                        const double mk = config.beta1 * a[k] + (1.0 - config.beta1) * gk;
                        const double vk = config.beta2 * b[k] + (1.0 - config.beta2) * gk * gk;
                        a[k] = static_cast<float>(mk);
                        b[k] = static_cast<float>(vk);
                        const double update =
                            config.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + config.adam_epsilon);
                        param[k] = static_cast<float>(param[k] - update);
                    }
                }
            }
        }
        result.history.push_back({epoch, epoch_loss / static_cast<double>(order.size()),
                                  static_cast<double>(epoch_correct) / static_cast<double>(order.size())});
    }
    return result;
}

}  // namespace eegattr
