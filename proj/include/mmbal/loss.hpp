// Softmax and mean cross-entropy with the exact analytic gradient.
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "mmbal/common.hpp"
#include "mmbal/matrix.hpp"

namespace mmbal {

// Row-wise softmax, stabilized by subtracting the row max so that large
// logits never overflow.
inline Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* in = logits.row(i);
        double* o = out.row(i);
        double mx = in[0];
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) o[j] /= sum;
    }
    return out;
}

struct LossAndGrad {
    double loss;     // mean over the batch
    Matrix dlogits;  // (softmax - onehot) / batch
};

inline LossAndGrad softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    check_config(labels.size() == logits.rows(), "softmax_cross_entropy: label count mismatch");
    const std::size_t batch = logits.rows();
    const std::size_t classes = logits.cols();
    for (int y : labels) {
        check_config(y >= 0 && static_cast<std::size_t>(y) < classes,
                     "softmax_cross_entropy: label out of range");
    }
    Matrix probs = softmax(logits);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        // -log p_y computed from the stabilized logits directly, so a
        // saturated probability of 1.0 still yields an exact 0 loss.
        const double* in = logits.row(i);
        double mx = in[0];
        for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) sum += std::exp(in[j] - mx);
        loss += std::log(sum) - (in[static_cast<std::size_t>(labels[i])] - mx);
    }
    loss /= static_cast<double>(batch);

    Matrix dlogits = probs;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        double* r = dlogits.row(i);
        r[static_cast<std::size_t>(labels[i])] -= 1.0;
        for (std::size_t j = 0; j < classes; ++j) r[j] *= inv_batch;
    }
    return {loss, std::move(dlogits)};
}

}  // namespace mmbal
