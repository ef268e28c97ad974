// On-the-fly balancing strategies for late-fusion training.
//
// Monitors per-modality discriminative scores s and their discrepancy ratio
// rho every iteration, then either drops the dominant modality's feature
// with adaptive probability q (prediction modulation), or scales its
// gradient by coefficient k and injects covariance-matched Gaussian noise
// (gradient modulation). The starred variant boosts the weak modality
// instead of attenuating the dominant one.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mmbal/common.hpp"
#include "mmbal/fusion.hpp"
#include "mmbal/loss.hpp"
#include "mmbal/optimizer.hpp"
#include "mmbal/rng.hpp"

namespace mmbal {

enum class Strategy { none, opm, ogm, ogm_star, opm_plus_ogm };
enum class ZFunction { tanh_shifted, sigmoid };
enum class RhoMeasure { ratio, difference };
enum class ScoreMode { component_split, zero_out };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::none: return "none";
        case Strategy::opm: return "opm";
        case Strategy::ogm: return "ogm";
        case Strategy::ogm_star: return "ogm_star";
        case Strategy::opm_plus_ogm: return "opm_plus_ogm";
    }
    return "none";
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "none") return Strategy::none;
    if (s == "opm") return Strategy::opm;
    if (s == "ogm") return Strategy::ogm;
    if (s == "ogm_star") return Strategy::ogm_star;
    if (s == "opm_plus_ogm") return Strategy::opm_plus_ogm;
    throw config_error("unknown strategy: " + s);
}

inline std::string to_string(ZFunction z) {
    return z == ZFunction::tanh_shifted ? "tanh_shifted" : "sigmoid";
}
inline ZFunction z_function_from_string(const std::string& s) {
    if (s == "tanh_shifted") return ZFunction::tanh_shifted;
    if (s == "sigmoid") return ZFunction::sigmoid;
    throw config_error("unknown z function: " + s);
}

inline std::string to_string(RhoMeasure r) {
    return r == RhoMeasure::ratio ? "ratio" : "difference";
}
inline RhoMeasure rho_measure_from_string(const std::string& s) {
    if (s == "ratio") return RhoMeasure::ratio;
    if (s == "difference") return RhoMeasure::difference;
    throw config_error("unknown rho measure: " + s);
}

inline std::string to_string(ScoreMode m) {
    return m == ScoreMode::component_split ? "component_split" : "zero_out";
}
inline ScoreMode score_mode_from_string(const std::string& s) {
    if (s == "component_split") return ScoreMode::component_split;
    if (s == "zero_out") return ScoreMode::zero_out;
    throw config_error("unknown score mode: " + s);
}

struct ModulationConfig {
    Strategy strategy = Strategy::none;
    double q_base = 0.5;   // base drop probability; 0 is the degenerate no-op bound
    double lambda = 0.5;   // drop-probability adjustment strength
    double alpha = 0.1;    // gradient-modulation strength
    ZFunction z_fn = ZFunction::tanh_shifted;
    RhoMeasure rho_measure = RhoMeasure::ratio;
    bool noise_enabled = true;
    ScoreMode score_mode = ScoreMode::component_split;
    bool modulate_head = false;          // also scale the head's W^m blocks by k^m
    bool noise_only_modulated = false;   // restrict noise to encoders with k < 1

    bool opm_active() const {
        return strategy == Strategy::opm || strategy == Strategy::opm_plus_ogm;
    }
    bool ogm_active() const {
        return strategy == Strategy::ogm || strategy == Strategy::ogm_star ||
               strategy == Strategy::opm_plus_ogm;
    }

    void validate() const {
        check_config(q_base >= 0.0 && q_base < 1.0, "ModulationConfig: q_base must be in [0,1)");
        check_config(lambda > 0.0, "ModulationConfig: lambda must be positive");
        check_config(alpha >= 0.0, "ModulationConfig: alpha must be non-negative");
    }
};

// Per-iteration traces. prev_rho feeds the drop probability (computed from
// the previous iteration), rho/q/k are the current iteration's values.
struct ModulationState {
    std::vector<double> prev_rho;
    std::vector<double> s_sums;
    std::vector<double> rho;
    std::vector<double> q;
    std::vector<double> k;

    // Neutral init: no modality counts as dominant on the first iteration.
    static ModulationState init(std::size_t num_modalities, RhoMeasure measure) {
        ModulationState s;
        const double neutral = measure == RhoMeasure::ratio ? 1.0 : 0.0;
        s.prev_rho.assign(num_modalities, neutral);
        s.s_sums.assign(num_modalities, 0.0);
        s.rho.assign(num_modalities, neutral);
        s.q.assign(num_modalities, 0.0);
        s.k.assign(num_modalities, 1.0);
        return s;
    }
};

inline double z_value(double x, ZFunction z) {
    return z == ZFunction::tanh_shifted ? std::tanh(x - 1.0) : 1.0 / (1.0 + std::exp(-x));
}

inline bool rho_dominant(double rho, RhoMeasure measure) {
    return measure == RhoMeasure::ratio ? rho > 1.0 : rho > 0.0;
}

// Batch-summed softmax probability each modality's component assigns to the
// true class. Always computed from the unmasked features, so feature dropout
// in the same iteration does not corrupt the discrepancy estimate.
inline std::vector<double> unimodal_scores(const FusionModel& model, const FusionTrace& trace,
                                           const std::vector<int>& labels, ScoreMode mode) {
    const std::size_t num_m = model.num_modalities();
    std::vector<double> s_sums(num_m, 0.0);
    const double inv_m = 1.0 / static_cast<double>(num_m);
    for (std::size_t m = 0; m < num_m; ++m) {
        Matrix logits_m;
        if (mode == ScoreMode::component_split) {
            check_config(model.head_kind == HeadKind::single_linear,
                         "unimodal_scores: component_split requires the single_linear head; "
                         "use zero_out score mode");
            logits_m = detail::head_component(model, trace.raw_features[m], m);
            const std::vector<double>& b = model.head.layers[0].bias;
            for (std::size_t i = 0; i < logits_m.rows(); ++i) {
                double* r = logits_m.row(i);
                for (std::size_t j = 0; j < logits_m.cols(); ++j) r[j] += b[j] * inv_m;
            }
        } else {
            logits_m = zero_out_logits_from_feature(model, trace.raw_features[m], m);
        }
        Matrix probs = softmax(logits_m);
        for (std::size_t i = 0; i < probs.rows(); ++i) {
            s_sums[m] += probs(i, static_cast<std::size_t>(labels[i]));
        }
    }
    return s_sums;
}

// rho^m = mean over other modalities of the score ratio (or difference).
inline std::vector<double> discrepancy_ratio(const std::vector<double>& s_sums,
                                             RhoMeasure measure) {
    const std::size_t num_m = s_sums.size();
    std::vector<double> rho(num_m, measure == RhoMeasure::ratio ? 1.0 : 0.0);
    if (num_m < 2) return rho;
    for (std::size_t m = 0; m < num_m; ++m) {
        double acc = 0.0;
        for (std::size_t j = 0; j < num_m; ++j) {
            if (j == m) continue;
            if (measure == RhoMeasure::ratio) {
                double denom = s_sums[j];
                if (denom < 1e-12) {
                    warn("discrepancy_ratio: score sum below 1e-12, clamping denominator");
                    denom = 1e-12;
                }
                acc += s_sums[m] / denom;
            } else {
                acc += s_sums[m] - s_sums[j];
            }
        }
        rho[m] = acc / static_cast<double>(num_m - 1);
    }
    return rho;
}

// q^m = q_base * (1 + lambda * z(rho^m)) for dominant modalities, else 0;
// clamped to [0,1]. Uses the previous iteration's rho.
inline std::vector<double> opm_drop_prob(const std::vector<double>& rho_prev,
                                         const ModulationConfig& cfg) {
    std::vector<double> q(rho_prev.size(), 0.0);
    for (std::size_t m = 0; m < rho_prev.size(); ++m) {
        if (rho_dominant(rho_prev[m], cfg.rho_measure)) {
            q[m] = std::clamp(cfg.q_base * (1.0 + cfg.lambda * z_value(rho_prev[m], cfg.z_fn)),
                              0.0, 1.0);
        }
    }
    return q;
}

// Independent per-cell drops. Documented stream: for each modality m in
// order, skipping those with q^m == 0, draw one uniform01 per sample i in
// order; the cell is dropped iff u < q^m. Skipping q == 0 keeps the
// degenerate q_base = 0 run byte-identical to the baseline.
inline DropMask apply_opm_mask(const std::vector<double>& q, std::size_t batch_size, Rng& rng) {
    DropMask mask;
    mask.drop.assign(q.size(), std::vector<std::uint8_t>(batch_size, 0));
    for (std::size_t m = 0; m < q.size(); ++m) {
        check_config(q[m] >= 0.0 && q[m] <= 1.0, "apply_opm_mask: q out of [0,1]");
        if (q[m] == 0.0) continue;
        for (std::size_t i = 0; i < batch_size; ++i) {
            if (rng.uniform01() < q[m]) mask.drop[m][i] = 1;
        }
    }
    return mask;
}

// k^m = 1 - alpha * z(rho^m) for dominant modalities, else 1; clamped to
// [0,1]. Uses the current iteration's rho.
inline std::vector<double> ogm_coefficient(const std::vector<double>& rho,
                                           const ModulationConfig& cfg) {
    std::vector<double> k(rho.size(), 1.0);
    for (std::size_t m = 0; m < rho.size(); ++m) {
        if (rho_dominant(rho[m], cfg.rho_measure)) {
            k[m] = std::clamp(1.0 - cfg.alpha * z_value(rho[m], cfg.z_fn), 0.0, 1.0);
        }
    }
    return k;
}

// Starred variant: dominant modalities keep k = 1; the others get the
// mirrored boost 1 + alpha * z(rho_max), never below 1.
inline std::vector<double> ogm_star_coefficient(const std::vector<double>& rho,
                                                const ModulationConfig& cfg) {
    std::vector<double> k(rho.size(), 1.0);
    const double rho_max = *std::max_element(rho.begin(), rho.end());
    if (!rho_dominant(rho_max, cfg.rho_measure)) return k;
    const double boost = std::max(1.0, 1.0 + cfg.alpha * z_value(rho_max, cfg.z_fn));
    for (std::size_t m = 0; m < rho.size(); ++m) {
        if (!rho_dominant(rho[m], cfg.rho_measure)) k[m] = boost;
    }
    return k;
}

// Diagonal variance of the mini-batch mean gradient: unbiased per-coordinate
// sample variance of the per-sample gradients, divided by the batch size.
inline MlpGrads estimate_grad_variance(const std::vector<MlpGrads>& per_sample) {
    check_config(!per_sample.empty(), "estimate_grad_variance: empty gradient list");
    const std::size_t n = per_sample.size();
    MlpGrads var;
    const MlpGrads& first = per_sample.front();
    var.weight.reserve(first.weight.size());
    var.bias.reserve(first.bias.size());
    for (std::size_t l = 0; l < first.weight.size(); ++l) {
        var.weight.emplace_back(first.weight[l].rows(), first.weight[l].cols());
        var.bias.emplace_back(first.bias[l].size(), 0.0);
    }
    if (n < 2) {
        warn("estimate_grad_variance: batch of 1, variance set to 0");
        return var;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const double unbias = 1.0 / static_cast<double>(n - 1);
    auto accumulate = [&](auto get_coord, std::size_t count, auto set_var) {
        for (std::size_t c = 0; c < count; ++c) {
            double mean = 0.0;
            for (std::size_t s = 0; s < n; ++s) mean += get_coord(s, c);
            mean *= inv_n;
            double ss = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const double d = get_coord(s, c) - mean;
                ss += d * d;
            }
            set_var(c, ss * unbias * inv_n);  // sample variance / |B|
        }
    };
    for (std::size_t l = 0; l < first.weight.size(); ++l) {
        accumulate([&](std::size_t s, std::size_t c) { return per_sample[s].weight[l].data()[c]; },
                   first.weight[l].size(),
                   [&](std::size_t c, double v) { var.weight[l].data()[c] = v; });
        accumulate([&](std::size_t s, std::size_t c) { return per_sample[s].bias[l][c]; },
                   first.bias[l].size(),
                   [&](std::size_t c, double v) { var.bias[l][c] = v; });
    }
    return var;
}

// Gaussian noise h ~ N(0, diag(variance)). Zero variance yields exactly zero
// noise without consuming RNG draws. Draw order: layers in order, weight
// row-major, then bias.
inline MlpGrads sample_noise(const MlpGrads& variance, Rng& rng) {
    MlpGrads noise;
    noise.weight.reserve(variance.weight.size());
    noise.bias.reserve(variance.bias.size());
    for (std::size_t l = 0; l < variance.weight.size(); ++l) {
        Matrix w(variance.weight[l].rows(), variance.weight[l].cols());
        for (std::size_t c = 0; c < w.size(); ++c) {
            const double v = variance.weight[l].data()[c];
            check_config(v >= 0.0, "sample_noise: negative variance");
            w.data()[c] = v == 0.0 ? 0.0 : std::sqrt(v) * rng.normal();
        }
        noise.weight.push_back(std::move(w));
        std::vector<double> b(variance.bias[l].size(), 0.0);
        for (std::size_t c = 0; c < b.size(); ++c) {
            const double v = variance.bias[l][c];
            check_config(v >= 0.0, "sample_noise: negative variance");
            b[c] = v == 0.0 ? 0.0 : std::sqrt(v) * rng.normal();
        }
        noise.bias.push_back(std::move(b));
    }
    return noise;
}

// theta <- theta - lr * (k * grad + noise), through the momentum buffer.
// With k == 1 and no noise this is bit-for-bit the vanilla update.
inline void modulated_update(MlpParams& params, const MlpGrads& grads, double k,
                             const MlpGrads* noise, OptimizerState& state) {
    if (k == 1.0 && noise == nullptr) {
        sgd_momentum_step(params, grads, state, 1.0);
        return;
    }
    if (noise == nullptr) {
        sgd_momentum_step(params, grads, state, k);
        return;
    }
    MlpGrads effective = grads;
    for (std::size_t l = 0; l < effective.weight.size(); ++l) {
        for (std::size_t c = 0; c < effective.weight[l].size(); ++c) {
            effective.weight[l].data()[c] =
                k * effective.weight[l].data()[c] + noise->weight[l].data()[c];
        }
        for (std::size_t c = 0; c < effective.bias[l].size(); ++c) {
            effective.bias[l][c] = k * effective.bias[l][c] + noise->bias[l][c];
        }
    }
    sgd_momentum_step(params, effective, state, 1.0);
}

}  // namespace mmbal
