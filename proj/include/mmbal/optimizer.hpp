// SGD with momentum over one MLP's parameter set.
//
// Update rule: v <- momentum*v + scale*grad; param <- param - lr*v.
// The scale argument carries the gradient-modulation coefficient k; any
// injected noise must already be folded into grad by the caller.
#pragma once

#include <cmath>
#include <string>

#include "mmbal/common.hpp"
#include "mmbal/mlp.hpp"

namespace mmbal {

struct OptimizerState {
    double lr = 1e-3;
    double momentum = 0.9;
    MlpGrads velocity;  // shapes mirror the parameter tensors

    static OptimizerState for_params(const MlpParams& p, double lr, double momentum) {
        check_config(lr > 0.0, "OptimizerState: learning rate must be positive");
        check_config(momentum >= 0.0 && momentum < 1.0, "OptimizerState: momentum must be in [0,1)");
        OptimizerState s;
        s.lr = lr;
        s.momentum = momentum;
        s.velocity = MlpGrads::zeros_like(p);
        return s;
    }
};

namespace detail {

inline void sgd_tensor(double* param, double* vel, const double* grad, std::size_t n, double lr,
                       double momentum, double scale) {
    for (std::size_t i = 0; i < n; ++i) {
        check_contract(std::isfinite(grad[i]), "sgd_momentum_step: non-finite gradient");
        vel[i] = momentum * vel[i] + scale * grad[i];
        param[i] -= lr * vel[i];
    }
}

}  // namespace detail

inline void sgd_momentum_step(MlpParams& params, const MlpGrads& grads, OptimizerState& state,
                              double scale = 1.0) {
    check_contract(state.velocity.weight.size() == params.layers.size(),
                   "sgd_momentum_step: velocity/parameter layer count mismatch");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        DenseLayer& layer = params.layers[l];
        check_contract(grads.weight[l].same_shape(layer.weight) &&
                           grads.bias[l].size() == layer.bias.size(),
                       "sgd_momentum_step: gradient shape mismatch");
        detail::sgd_tensor(layer.weight.data().data(), state.velocity.weight[l].data().data(),
                           grads.weight[l].data().data(), layer.weight.size(), state.lr,
                           state.momentum, scale);
        detail::sgd_tensor(layer.bias.data(), state.velocity.bias[l].data(), grads.bias[l].data(),
                           layer.bias.size(), state.lr, state.momentum, scale);
    }
}

}  // namespace mmbal
