#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "havenet/errors.hpp"
#include "havenet/rng.hpp"
#include "havenet/tensor.hpp"

namespace havenet {

enum class Activation : std::uint8_t { identity = 0, relu = 1, sigmoid = 2 };

enum class ForwardMode { train, eval };

struct Layer {
    Tensor2 weight;  // in x out
    Tensor2 bias;    // 1 x out
    Activation activation = Activation::identity;

    std::size_t in_dim() const { return weight.rows; }
    std::size_t out_dim() const { return weight.cols; }
};

struct LayerGrads {
    Tensor2 weight;
    Tensor2 bias;
};

// Small fully connected net with explicit gradient buffers. Dropout (inverted,
// scaled at train time) applies after the activation of every layer except the
// last when dropout_rate > 0.
struct MlpNet {
    std::vector<Layer> layers;
    double dropout_rate = 0.0;
    std::vector<LayerGrads> grads;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }

    void zero_grads() {
        grads.resize(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            grads[l].weight = Tensor2(layers[l].weight.rows, layers[l].weight.cols);
            grads[l].bias = Tensor2(1, layers[l].bias.cols);
        }
    }

    void validate() const {
        if (layers.empty()) throw ConfigError("MlpNet: no layers");
        for (std::size_t l = 0; l + 1 < layers.size(); ++l)
            if (layers[l].out_dim() != layers[l + 1].in_dim())
                throw DimensionError("MlpNet: layer " + std::to_string(l) + " out " +
                                     std::to_string(layers[l].out_dim()) +
                                     " != layer " + std::to_string(l + 1) + " in " +
                                     std::to_string(layers[l + 1].in_dim()));
        for (const auto& ly : layers)
            if (ly.bias.rows != 1 || ly.bias.cols != ly.weight.cols)
                throw DimensionError("MlpNet: bias shape " + ly.bias.shape_str() +
                                     " does not match weight " + ly.weight.shape_str());
        if (dropout_rate < 0.0 || dropout_rate >= 1.0)
            throw ConfigError("MlpNet: dropout_rate must be in [0,1)");
    }
};

// Per-forward record of everything backward needs. Masks hold the already
// scaled keep/drop factors (0 or 1/(1-p)); empty tensor = no dropout on that
// layer.
struct Tape {
    const MlpNet* net = nullptr;
    Tensor2 input;
    std::vector<Tensor2> pre_activations;    // one per layer, batch x out
    std::vector<Tensor2> post_activations;   // after activation + dropout
    std::vector<Tensor2> dropout_masks;      // one per layer (empty if none)

    const Tensor2& output() const { return post_activations.back(); }
};

inline double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        default: return z;
    }
}

inline double activation_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return y * (1.0 - y);
        default: return 1.0;
    }
}

// Forward pass. In train mode dropout masks come from rng, unless fixed_masks
// replays a previously recorded set (used by gradient checks to hold the
// stochastic path constant).
inline Tape forward(const MlpNet& net, const Tensor2& input, ForwardMode mode,
                    RngStream* rng = nullptr,
                    const std::vector<Tensor2>* fixed_masks = nullptr) {
    if (input.cols != net.input_dim())
        throw DimensionError("forward: input " + input.shape_str() +
                             " does not match first layer in=" +
                             std::to_string(net.input_dim()));
    const bool train = mode == ForwardMode::train;
    if (train && net.dropout_rate > 0.0 && rng == nullptr && fixed_masks == nullptr)
        throw StateError("forward: train mode with dropout needs an rng stream");

    Tape tape;
    tape.net = &net;
    tape.input = input;
    tape.pre_activations.resize(net.layers.size());
    tape.post_activations.resize(net.layers.size());
    tape.dropout_masks.resize(net.layers.size());

    const Tensor2* x = &input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& ly = net.layers[l];
        Tensor2 z = matmul(*x, ly.weight);
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) += ly.bias.at(0, j);
        Tensor2 y(z.rows, z.cols);
        for (std::size_t i = 0; i < z.size(); ++i)
            y.data[i] = apply_activation(ly.activation, z.data[i]);

        const bool drop_here = train && net.dropout_rate > 0.0 &&
                               l + 1 < net.layers.size();
        if (drop_here) {
            Tensor2 mask(z.rows, z.cols);
            if (fixed_masks) {
                if ((*fixed_masks)[l].size() != mask.size())
                    throw StateError("forward: fixed mask shape mismatch at layer " +
                                     std::to_string(l));
                mask = (*fixed_masks)[l];
            } else {
                const double keep_scale = 1.0 / (1.0 - net.dropout_rate);
                for (std::size_t i = 0; i < mask.size(); ++i)
                    mask.data[i] = rng->bernoulli(net.dropout_rate) ? 0.0 : keep_scale;
            }
            for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= mask.data[i];
            tape.dropout_masks[l] = std::move(mask);
        }

        tape.pre_activations[l] = std::move(z);
        tape.post_activations[l] = std::move(y);
        x = &tape.post_activations[l];
    }
    return tape;
}

// Reverse pass. Accumulates parameter gradients into net.grads (additive
// across calls until zero_grads) unless accumulate is false; returns the
// gradient with respect to the forward input either way.
inline Tensor2 backward(MlpNet& net, const Tape& tape, const Tensor2& output_grad,
                        bool accumulate = true) {
    if (tape.net != &net)
        throw StateError("backward: tape was produced by a different net");
    if (!output_grad.same_shape(tape.output()))
        throw DimensionError("backward: output grad " + output_grad.shape_str() +
                             " vs output " + tape.output().shape_str());
    if (accumulate && net.grads.size() != net.layers.size()) net.zero_grads();

    Tensor2 grad = output_grad;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& ly = net.layers[li];
        // undo dropout, then activation
        if (!tape.dropout_masks[li].empty())
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad.data[i] *= tape.dropout_masks[li].data[i];
        const Tensor2& z = tape.pre_activations[li];
        Tensor2 dz(grad.rows, grad.cols);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            // sigmoid grad needs post-activation value before dropout
            const double y = apply_activation(ly.activation, z.data[i]);
            dz.data[i] = grad.data[i] * activation_grad(ly.activation, z.data[i], y);
        }
        const Tensor2& layer_in =
            li == 0 ? tape.input : tape.post_activations[li - 1];
        if (accumulate) {
            Tensor2 dw = matmul_tn(layer_in, dz);
            axpy(net.grads[li].weight, 1.0, dw);
            for (std::size_t j = 0; j < dz.cols; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < dz.rows; ++i) s += dz.at(i, j);
                net.grads[li].bias.at(0, j) += s;
            }
        }
        grad = matmul_nt(dz, ly.weight);
    }
    return grad;
}

// Glorot-uniform initialized net from a layer size list.
inline MlpNet make_mlp(const std::vector<std::size_t>& sizes,
                       const std::vector<Activation>& activations,
                       RngStream& rng, double dropout_rate = 0.0) {
    if (sizes.size() < 2 || activations.size() != sizes.size() - 1)
        throw ConfigError("make_mlp: need n>=2 sizes and n-1 activations");
    MlpNet net;
    net.dropout_rate = dropout_rate;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer ly;
        ly.weight = Tensor2(sizes[l], sizes[l + 1]);
        ly.bias = Tensor2(1, sizes[l + 1]);
        ly.activation = activations[l];
        const double bound = std::sqrt(6.0 / double(sizes[l] + sizes[l + 1]));
        for (auto& w : ly.weight.data) w = (rng.uniform() * 2.0 - 1.0) * bound;
        net.layers.push_back(std::move(ly));
    }
    net.zero_grads();
    net.validate();
    return net;
}

}  // namespace havenet
