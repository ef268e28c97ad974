// Minimal dense MLP with exact hand-derived gradients.
//
// Layers are fully connected with identity or relu activation; forward runs
// y = act(x W^T + b) per layer. The cache captures everything the backward
// pass needs, and backward returns chain-rule gradients for every parameter
// plus the input.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mmbal/common.hpp"
#include "mmbal/matrix.hpp"
#include "mmbal/rng.hpp"

namespace mmbal {

enum class Activation { identity, relu };

inline std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw config_error("unknown activation: " + s);
}

struct DenseLayer {
    Matrix weight;             // out_dim x in_dim
    std::vector<double> bias;  // out_dim
    Activation activation = Activation::identity;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

struct MlpParams {
    std::vector<DenseLayer> layers;

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }

    void validate() const {
        check_config(!layers.empty(), "MlpParams: no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            check_config(layers[l].bias.size() == layers[l].out_dim(),
                         "MlpParams: bias/weight dimension mismatch");
            if (l > 0) {
                check_config(layers[l].in_dim() == layers[l - 1].out_dim(),
                             "MlpParams: consecutive layer dims do not chain");
            }
        }
    }

    std::size_t num_params() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }
};

// Gradient (or any per-coordinate companion value, e.g. velocity, variance)
// with the same shapes as MlpParams.
struct MlpGrads {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;

    static MlpGrads zeros_like(const MlpParams& p) {
        MlpGrads g;
        g.weight.reserve(p.layers.size());
        g.bias.reserve(p.layers.size());
        for (const auto& l : p.layers) {
            g.weight.emplace_back(l.out_dim(), l.in_dim());
            g.bias.emplace_back(l.out_dim(), 0.0);
        }
        return g;
    }
};

struct MlpCache {
    std::vector<Matrix> inputs;    // a_0 = x, a_1, ..., a_{L-1} (post-activation)
    std::vector<Matrix> preacts;   // z_1, ..., z_L (pre-activation)

    bool matches(const MlpParams& p, std::size_t batch) const {
        if (inputs.size() != p.layers.size() || preacts.size() != p.layers.size()) return false;
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            if (inputs[l].rows() != batch || inputs[l].cols() != p.layers[l].in_dim()) return false;
            if (preacts[l].rows() != batch || preacts[l].cols() != p.layers[l].out_dim()) return false;
        }
        return true;
    }
};

inline Matrix apply_activation(const Matrix& z, Activation a) {
    if (a == Activation::identity) return z;
    Matrix out = z;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

inline std::pair<Matrix, MlpCache> mlp_forward(const MlpParams& params, const Matrix& x) {
    params.validate();
    check_config(x.cols() == params.in_dim(), "mlp_forward: input width does not match first layer");
    MlpCache cache;
    Matrix a = x;
    for (const auto& layer : params.layers) {
        cache.inputs.push_back(a);
        Matrix z = matmul_bt(a, layer.weight);
        add_row_vector(z, layer.bias);
        cache.preacts.push_back(z);
        a = apply_activation(z, layer.activation);
    }
    check_contract(a.all_finite(), "mlp_forward: non-finite output");
    return {std::move(a), std::move(cache)};
}

// Backward through the cached forward. dout is d(scalar)/d(output).
inline std::pair<MlpGrads, Matrix> mlp_backward(const MlpParams& params, const MlpCache& cache,
                                                const Matrix& dout) {
    check_contract(cache.matches(params, dout.rows()),
                   "mlp_backward: cache does not match params/batch");
    check_config(dout.cols() == params.out_dim(), "mlp_backward: dout width mismatch");

    MlpGrads grads = MlpGrads::zeros_like(params);
    Matrix da = dout;
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const DenseLayer& layer = params.layers[l];
        Matrix dz = da;
        if (layer.activation == Activation::relu) {
            const Matrix& z = cache.preacts[l];
            for (std::size_t i = 0; i < dz.size(); ++i) {
                if (z.data()[i] <= 0.0) dz.data()[i] = 0.0;
            }
        }
        grads.weight[l] = matmul_at(dz, cache.inputs[l]);
        grads.bias[l] = column_sums(dz);
        da = matmul(dz, layer.weight);
    }
    return {std::move(grads), std::move(da)};
}

// Per-layer uniform init in [-1/sqrt(in_dim), +1/sqrt(in_dim)].
// Draw order: layers in order; within a layer the weight matrix row-major,
// then the bias.
inline MlpParams init_mlp(std::size_t in_dim, const std::vector<std::size_t>& out_dims,
                          const std::vector<Activation>& activations, Rng& rng) {
    check_config(out_dims.size() == activations.size() && !out_dims.empty(),
                 "init_mlp: layer spec mismatch");
    MlpParams params;
    std::size_t prev = in_dim;
    for (std::size_t l = 0; l < out_dims.size(); ++l) {
        DenseLayer layer;
        const double bound = 1.0 / std::sqrt(static_cast<double>(prev));
        layer.weight = Matrix(out_dims[l], prev);
        for (double& v : layer.weight.data()) v = (2.0 * rng.uniform01() - 1.0) * bound;
        layer.bias.assign(out_dims[l], 0.0);
        for (double& v : layer.bias) v = (2.0 * rng.uniform01() - 1.0) * bound;
        layer.activation = activations[l];
        params.layers.push_back(std::move(layer));
        prev = out_dims[l];
    }
    return params;
}

// Mutable pointers to every scalar parameter, in the documented order
// (layer by layer, weight row-major, then bias). Used by the finite
// difference oracle and the flat checkpoint layout.
inline void collect_param_pointers(MlpParams& p, std::vector<double*>& out) {
    for (auto& layer : p.layers) {
        for (double& v : layer.weight.data()) out.push_back(&v);
        for (double& v : layer.bias) out.push_back(&v);
    }
}

inline void flatten_grads(const MlpGrads& g, std::vector<double>& out) {
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
        out.insert(out.end(), g.weight[l].data().begin(), g.weight[l].data().end());
        out.insert(out.end(), g.bias[l].begin(), g.bias[l].end());
    }
}

}  // namespace mmbal
