// Encoder probing: freeze one encoder, fit a fresh linear classifier on its
// features, and report test accuracy as a measure of representation quality.
#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "mmbal/fusion.hpp"
#include "mmbal/loss.hpp"
#include "mmbal/metrics.hpp"
#include "mmbal/optimizer.hpp"
#include "mmbal/rng.hpp"

namespace mmbal {

struct ProbeConfig {
    std::size_t epochs = 30;
    double lr = 1e-3;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
};

// Accuracy of a linear probe trained on frozen features.
inline double probe_features(const Matrix& train_features, const std::vector<int>& train_labels,
                             const Matrix& test_features, const std::vector<int>& test_labels,
                             std::size_t num_classes, const ProbeConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, stream::probe));
    MlpParams probe = init_mlp(train_features.cols(), {num_classes}, {Activation::identity}, rng);
    OptimizerState opt = OptimizerState::for_params(probe, cfg.lr, cfg.momentum);

    const std::size_t n = train_features.rows();
    const std::size_t batch = std::min(cfg.batch_size, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start + batch <= n; start += batch) {
            Matrix x(batch, train_features.cols());
            std::vector<int> y(batch);
            for (std::size_t r = 0; r < batch; ++r) {
                const std::size_t src = order[start + r];
                std::copy(train_features.row(src), train_features.row(src) + x.cols(), x.row(r));
                y[r] = train_labels[src];
            }
            auto [logits, cache] = mlp_forward(probe, x);
            auto [loss, dlogits] = softmax_cross_entropy(logits, y);
            (void)loss;
            auto [grads, dinput] = mlp_backward(probe, cache, dlogits);
            (void)dinput;
            sgd_momentum_step(probe, grads, opt);
        }
    }

    const Matrix logits = mlp_forward(probe, test_features).first;
    const std::vector<int> pred = argmax_predictions(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_labels.size(); ++i) {
        if (pred[i] == test_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_labels.size());
}

// Probe modality m's encoder inside a (possibly mid-training) fusion model.
inline double probe_encoder(const FusionModel& model, std::size_t m, const MultimodalBatch& train,
                            const MultimodalBatch& test, const ProbeConfig& cfg) {
    const Matrix train_features = mlp_forward(model.encoders[m], train.inputs[m]).first;
    const Matrix test_features = mlp_forward(model.encoders[m], test.inputs[m]).first;
    return probe_features(train_features, train.labels, test_features, test.labels,
                          model.num_classes, cfg);
}

}  // namespace mmbal
