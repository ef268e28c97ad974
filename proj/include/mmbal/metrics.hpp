// Classification metrics: accuracy, per-class average precision, mAP, F1.
//
// AP_c follows the weighted precision-recall summation
// AP_c = sum_n (R_n - R_{n-1}) * P_n with thresholds at the distinct
// predicted scores in descending order; tied scores share one threshold.
// Classes absent from the test set have undefined AP and are excluded from
// mAP with a warning. F1 is reported for binary tasks only, from the
// positive class (class index 1); zero-denominator cases yield 0.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mmbal/common.hpp"
#include "mmbal/fusion.hpp"
#include "mmbal/loss.hpp"

namespace mmbal {

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<double> per_class_ap;        // NaN where undefined
    std::vector<bool> ap_defined;
    double mean_ap = 0.0;                    // mean over defined classes
    double f1 = std::numeric_limits<double>::quiet_NaN();  // binary tasks only
};

// Argmax with ties broken toward the lowest class index.
inline std::vector<int> argmax_predictions(const Matrix& scores) {
    std::vector<int> pred(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const double* r = scores.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < scores.cols(); ++j) {
            if (r[j] > r[best]) best = j;
        }
        pred[i] = static_cast<int>(best);
    }
    return pred;
}

inline double average_precision(const std::vector<double>& scores,
                                const std::vector<bool>& positive) {
    const std::size_t n = scores.size();
    std::size_t total_pos = 0;
    for (bool p : positive) total_pos += p ? 1 : 0;
    if (total_pos == 0) return std::numeric_limits<double>::quiet_NaN();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        // consume the whole tie group at this threshold
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            if (positive[order[j]]) ++tp; else ++fp;
            ++j;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

// Metrics from per-sample class scores (any monotone score works; the
// trainer passes softmax probabilities).
inline MetricsReport compute_metrics(const Matrix& scores, const std::vector<int>& labels) {
    check_config(scores.rows() == labels.size(), "compute_metrics: label count mismatch");
    const std::size_t classes = scores.cols();
    MetricsReport report;

    const std::vector<int> pred = argmax_predictions(scores);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (pred[i] == labels[i]) ++correct;
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

    report.per_class_ap.assign(classes, std::numeric_limits<double>::quiet_NaN());
    report.ap_defined.assign(classes, false);
    double ap_sum = 0.0;
    std::size_t ap_count = 0;
    std::vector<double> class_scores(labels.size());
    std::vector<bool> positive(labels.size());
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            class_scores[i] = scores(i, c);
            positive[i] = labels[i] == static_cast<int>(c);
        }
        const double ap = average_precision(class_scores, positive);
        if (std::isnan(ap)) {
            warn("compute_metrics: class " + std::to_string(c) +
                 " absent from test set, excluded from mAP");
            continue;
        }
        report.per_class_ap[c] = ap;
        report.ap_defined[c] = true;
        ap_sum += ap;
        ++ap_count;
    }
    report.mean_ap = ap_count > 0 ? ap_sum / static_cast<double>(ap_count) : 0.0;

    if (classes == 2) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (pred[i] == 1 && labels[i] == 1) ++tp;
            else if (pred[i] == 1 && labels[i] == 0) ++fp;
            else if (pred[i] == 0 && labels[i] == 1) ++fn;
        }
        const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        report.f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return report;
}

inline MetricsReport evaluate(const FusionModel& model, const MultimodalBatch& test) {
    const FusionTrace trace = fusion_forward(model, test);
    return compute_metrics(softmax(trace.logits), test.labels);
}

}  // namespace mmbal
