#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "havenet/errors.hpp"
#include "havenet/mlp.hpp"

namespace havenet {

struct AdamState {
    std::uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<LayerGrads> m;  // first moments, mirror parameter shapes
    std::vector<LayerGrads> v;  // second moments

    static AdamState for_net(const MlpNet& net, double lr) {
        AdamState s;
        s.lr = lr;
        s.m.resize(net.layers.size());
        s.v.resize(net.layers.size());
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            s.m[l].weight = Tensor2(net.layers[l].weight.rows, net.layers[l].weight.cols);
            s.m[l].bias = Tensor2(1, net.layers[l].bias.cols);
            s.v[l] = s.m[l];
        }
        return s;
    }
};

// One Adam update from net.grads with bias correction. Grads are left
// untouched; the caller zeroes them.
inline void adam_step(AdamState& state, MlpNet& net) {
    if (state.m.size() != net.layers.size())
        throw StateError("adam_step: state does not mirror net layers");
    if (net.grads.size() != net.layers.size())
        throw StateError("adam_step: grads not populated");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    auto update = [&](Tensor2& param, const Tensor2& grad, Tensor2& m, Tensor2& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double g = grad.data[i];
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g;
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            param.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        update(net.layers[l].weight, net.grads[l].weight, state.m[l].weight,
               state.v[l].weight);
        update(net.layers[l].bias, net.grads[l].bias, state.m[l].bias, state.v[l].bias);
    }
}

}  // namespace havenet
