// Late-fusion multimodal classifier over M encoders.
//
// Encoder features are fused by concatenation or summation and passed to a
// classifier head. For the single-linear head the logits decompose exactly
// into per-modality components W^m * phi^m plus the shared bias, which is
// what the modulation module monitors.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmbal/common.hpp"
#include "mmbal/matrix.hpp"
#include "mmbal/mlp.hpp"

namespace mmbal {

enum class FusionMode { concatenation, summation };
enum class HeadKind { single_linear, multi_layer };

inline std::string to_string(FusionMode f) {
    return f == FusionMode::concatenation ? "concatenation" : "summation";
}
inline FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "concatenation") return FusionMode::concatenation;
    if (s == "summation") return FusionMode::summation;
    throw config_error("unknown fusion mode: " + s);
}

inline std::string to_string(HeadKind h) {
    return h == HeadKind::single_linear ? "single_linear" : "multi_layer";
}
inline HeadKind head_kind_from_string(const std::string& s) {
    if (s == "single_linear") return HeadKind::single_linear;
    if (s == "multi_layer") return HeadKind::multi_layer;
    throw config_error("unknown head type: " + s);
}

struct MultimodalBatch {
    std::vector<Matrix> inputs;  // one batch x in_dim_m matrix per modality
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t num_modalities() const { return inputs.size(); }

    void validate() const {
        check_config(!inputs.empty(), "MultimodalBatch: no modalities");
        for (const auto& x : inputs) {
            check_config(x.rows() == labels.size(),
                         "MultimodalBatch: modality row count differs from label count");
        }
    }

    // Row view: samples idx[0..n) of every modality.
    MultimodalBatch rows(const std::vector<std::size_t>& idx) const {
        MultimodalBatch out;
        out.inputs.reserve(inputs.size());
        for (const auto& x : inputs) {
            Matrix sub(idx.size(), x.cols());
            for (std::size_t r = 0; r < idx.size(); ++r) {
                const double* src = x.row(idx[r]);
                std::copy(src, src + x.cols(), sub.row(r));
            }
            out.inputs.push_back(std::move(sub));
        }
        out.labels.reserve(idx.size());
        for (std::size_t r : idx) out.labels.push_back(labels[r]);
        return out;
    }

    // Single-modality view (labels shared), for solo-training runs.
    MultimodalBatch modality_view(std::size_t m) const {
        MultimodalBatch out;
        out.inputs.push_back(inputs[m]);
        out.labels = labels;
        return out;
    }
};

// Per-sample-per-modality drop mask; empty() means nothing is dropped.
struct DropMask {
    std::vector<std::vector<std::uint8_t>> drop;  // [modality][sample], 1 = dropped

    bool empty() const { return drop.empty(); }
    bool dropped(std::size_t m, std::size_t i) const {
        return !drop.empty() && drop[m][i] != 0;
    }
};

struct FusionModel {
    std::vector<MlpParams> encoders;
    FusionMode fusion = FusionMode::concatenation;
    HeadKind head_kind = HeadKind::single_linear;
    MlpParams head;  // single_linear: exactly one identity layer
    std::size_t num_classes = 0;

    std::size_t num_modalities() const { return encoders.size(); }
    std::size_t feature_dim(std::size_t m) const { return encoders[m].out_dim(); }

    std::size_t fused_dim() const {
        if (fusion == FusionMode::concatenation) {
            std::size_t d = 0;
            for (const auto& e : encoders) d += e.out_dim();
            return d;
        }
        return encoders.front().out_dim();
    }

    void validate() const {
        check_config(!encoders.empty(), "FusionModel: no encoders");
        for (const auto& e : encoders) e.validate();
        head.validate();
        if (fusion == FusionMode::summation) {
            for (const auto& e : encoders) {
                check_config(e.out_dim() == encoders.front().out_dim(),
                             "FusionModel: summation fusion needs equal encoder output dims");
            }
        }
        check_config(head.in_dim() == fused_dim(), "FusionModel: head input dim mismatch");
        check_config(head.out_dim() == num_classes, "FusionModel: head output dim != classes");
        if (head_kind == HeadKind::single_linear) {
            check_config(head.layers.size() == 1 &&
                             head.layers[0].activation == Activation::identity,
                         "FusionModel: single_linear head must be one identity layer");
        }
    }

    // Column offset of modality m's block in the fused feature vector.
    std::size_t block_offset(std::size_t m) const {
        if (fusion == FusionMode::summation) return 0;
        std::size_t off = 0;
        for (std::size_t j = 0; j < m; ++j) off += encoders[j].out_dim();
        return off;
    }
};

struct FusionTrace {
    std::vector<Matrix> raw_features;  // encoder outputs before any masking
    std::vector<Matrix> features;      // after masking; these feed the head
    std::vector<Matrix> components;    // single_linear: W^m * features^m (no bias)
    Matrix logits;
    std::vector<MlpCache> encoder_caches;
    MlpCache head_cache;
    DropMask mask;
};

struct FusionGrads {
    std::vector<MlpGrads> encoders;
    MlpGrads head;
};

namespace detail {

inline Matrix fuse_features(const FusionModel& model, const std::vector<Matrix>& features) {
    if (model.fusion == FusionMode::concatenation) return hconcat(features);
    Matrix fused = features.front();
    for (std::size_t m = 1; m < features.size(); ++m) add_inplace(fused, features[m]);
    return fused;
}

// W^m * phi^m for the single_linear head (bias excluded). For summation
// fusion the shared W applies to each modality's feature.
inline Matrix head_component(const FusionModel& model, const Matrix& feature, std::size_t m) {
    const Matrix& w = model.head.layers[0].weight;
    if (model.fusion == FusionMode::summation) return matmul_bt(feature, w);
    return matmul_bt(feature, column_block(w, model.block_offset(m), feature.cols()));
}

}  // namespace detail

inline FusionTrace fusion_forward(const FusionModel& model, const MultimodalBatch& batch,
                                  const DropMask& mask = {}) {
    model.validate();
    batch.validate();
    check_config(batch.num_modalities() == model.num_modalities(),
                 "fusion_forward: modality count mismatch");
    if (!mask.empty()) {
        check_config(mask.drop.size() == model.num_modalities(),
                     "fusion_forward: mask modality count mismatch");
        for (const auto& col : mask.drop) {
            check_config(col.size() == batch.size(), "fusion_forward: mask sample count mismatch");
        }
    }

    FusionTrace trace;
    trace.mask = mask;
    for (std::size_t m = 0; m < model.num_modalities(); ++m) {
        auto [feat, cache] = mlp_forward(model.encoders[m], batch.inputs[m]);
        trace.raw_features.push_back(std::move(feat));
        trace.encoder_caches.push_back(std::move(cache));
    }
    trace.features = trace.raw_features;
    if (!mask.empty()) {
        for (std::size_t m = 0; m < model.num_modalities(); ++m) {
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (mask.dropped(m, i)) trace.features[m].zero_row(i);
            }
        }
    }

    Matrix fused = detail::fuse_features(model, trace.features);
    auto [logits, head_cache] = mlp_forward(model.head, fused);
    trace.logits = std::move(logits);
    trace.head_cache = std::move(head_cache);

    if (model.head_kind == HeadKind::single_linear) {
        for (std::size_t m = 0; m < model.num_modalities(); ++m) {
            trace.components.push_back(detail::head_component(model, trace.features[m], m));
        }
    }
    return trace;
}

// Modality m's additive share of the logits: W^m * phi^m + b/M.
inline Matrix unimodal_component(const FusionModel& model, const FusionTrace& trace,
                                 std::size_t m) {
    check_config(model.head_kind == HeadKind::single_linear,
                 "unimodal_component: requires the single_linear head; "
                 "use zero_out_logits for multi-layer heads");
    Matrix comp = trace.components[m];
    const std::vector<double>& b = model.head.layers[0].bias;
    const double inv_m = 1.0 / static_cast<double>(model.num_modalities());
    for (std::size_t i = 0; i < comp.rows(); ++i) {
        double* r = comp.row(i);
        for (std::size_t j = 0; j < comp.cols(); ++j) r[j] += b[j] * inv_m;
    }
    return comp;
}

// Head output when every feature vector except modality m's is zeroed.
// Works for any head; the zero-out estimate of uni-modal prediction.
inline Matrix zero_out_logits_from_feature(const FusionModel& model, const Matrix& feature_m,
                                           std::size_t m) {
    std::vector<Matrix> features;
    features.reserve(model.num_modalities());
    for (std::size_t j = 0; j < model.num_modalities(); ++j) {
        if (j == m) {
            features.push_back(feature_m);
        } else {
            features.emplace_back(feature_m.rows(), model.feature_dim(j));
        }
    }
    Matrix fused = detail::fuse_features(model, features);
    return mlp_forward(model.head, fused).first;
}

inline Matrix zero_out_logits(const FusionModel& model, const MultimodalBatch& batch,
                              std::size_t m) {
    model.validate();
    auto [feat, cache] = mlp_forward(model.encoders[m], batch.inputs[m]);
    (void)cache;
    return zero_out_logits_from_feature(model, feat, m);
}

// Backward through head and encoders. Samples whose feature was masked in
// the forward pass contribute zero gradient to their encoder: the mask
// zeroes the feature and blocks the gradient path by construction.
inline FusionGrads fusion_backward(const FusionModel& model, const FusionTrace& trace,
                                   const Matrix& dlogits) {
    FusionGrads grads;
    auto [head_grads, dfused] = mlp_backward(model.head, trace.head_cache, dlogits);
    grads.head = std::move(head_grads);

    grads.encoders.reserve(model.num_modalities());
    for (std::size_t m = 0; m < model.num_modalities(); ++m) {
        Matrix dfeat = model.fusion == FusionMode::concatenation
                           ? column_block(dfused, model.block_offset(m), model.feature_dim(m))
                           : dfused;
        if (!trace.mask.empty()) {
            for (std::size_t i = 0; i < dfeat.rows(); ++i) {
                if (trace.mask.dropped(m, i)) dfeat.zero_row(i);
            }
        }
        auto [enc_grads, dinput] = mlp_backward(model.encoders[m], trace.encoder_caches[m], dfeat);
        (void)dinput;
        grads.encoders.push_back(std::move(enc_grads));
    }
    return grads;
}

// Flat parameter order: encoder 0..M-1, then head (each in MlpParams order).
inline std::vector<double*> collect_param_pointers(FusionModel& model) {
    std::vector<double*> out;
    for (auto& e : model.encoders) collect_param_pointers(e, out);
    collect_param_pointers(model.head, out);
    return out;
}

inline std::vector<double> flatten_grads(const FusionGrads& g) {
    std::vector<double> out;
    for (const auto& e : g.encoders) flatten_grads(e, out);
    flatten_grads(g.head, out);
    return out;
}

}  // namespace mmbal
