// Config-driven training and evaluation orchestration.
//
// One train_run executes the baseline loop or any modulation strategy. Per
// iteration: sample a mini-batch, forward, estimate per-modality scores and
// the discrepancy ratio, apply the strategy (feature dropout computed from
// the previous iteration's ratio; gradient scaling and noise from the
// current one), update, log. Runs are bit-reproducible: all randomness comes
// from streams derived from the config seed (init, shuffle, opm_mask, noise,
// probe) and strategies that degenerate to the baseline consume identical
// draws.
#pragma once

#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmbal/checkpoint.hpp"
#include "mmbal/config.hpp"
#include "mmbal/datagen.hpp"
#include "mmbal/fusion.hpp"
#include "mmbal/loss.hpp"
#include "mmbal/metrics.hpp"
#include "mmbal/modulation.hpp"
#include "mmbal/optimizer.hpp"
#include "mmbal/probe.hpp"
#include "mmbal/rng.hpp"
#include "mmbal/runlog.hpp"

namespace mmbal {

// Encoder layers are relu throughout; the head is identity for
// single_linear and relu-hidden + identity-output for multi_layer.
// Init draw order: encoders 0..M-1, then the head.
inline FusionModel build_model(const ModelSpec& spec, const std::vector<std::size_t>& input_dims,
                               std::size_t num_classes, Rng& rng) {
    check_config(spec.encoder_layers.size() == input_dims.size(),
                 "build_model: encoder count differs from modality count");
    FusionModel model;
    model.fusion = spec.fusion;
    model.head_kind = spec.head_kind;
    model.num_classes = num_classes;
    for (std::size_t m = 0; m < input_dims.size(); ++m) {
        const auto& dims = spec.encoder_layers[m];
        model.encoders.push_back(
            init_mlp(input_dims[m], dims, std::vector<Activation>(dims.size(), Activation::relu),
                     rng));
    }
    const std::size_t fused = model.fused_dim();
    if (spec.head_kind == HeadKind::single_linear) {
        model.head = init_mlp(fused, {num_classes}, {Activation::identity}, rng);
    } else {
        std::vector<std::size_t> dims = spec.head_hidden;
        dims.push_back(num_classes);
        std::vector<Activation> acts(dims.size(), Activation::relu);
        acts.back() = Activation::identity;
        model.head = init_mlp(fused, dims, acts, rng);
    }
    model.validate();
    return model;
}

inline Dataset load_or_generate(const RunConfig& config) {
    if (config.data.spec.has_value()) return generate(*config.data.spec);
    return load_dataset(config.data.path);
}

struct TrainResult {
    RunLog log;
    FusionModel model;
    MetricsReport metrics;  // final clean test metrics
    bool diverged = false;
};

namespace detail {

inline double accuracy_of(const FusionModel& model, const MultimodalBatch& batch) {
    const Matrix logits = fusion_forward(model, batch).logits;
    const std::vector<int> pred = argmax_predictions(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (pred[i] == batch.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch.size());
}

// Per-sample encoder gradients for the covariance estimate: one single-row
// backward per sample, reusing the sample's mask row so the estimate matches
// the gradient actually applied.
inline std::vector<std::vector<MlpGrads>> per_sample_encoder_grads(const FusionModel& model,
                                                                   const MultimodalBatch& batch,
                                                                   const DropMask& mask) {
    const std::size_t num_m = model.num_modalities();
    std::vector<std::vector<MlpGrads>> per_encoder(num_m);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const MultimodalBatch one = batch.rows({i});
        DropMask one_mask;
        if (!mask.empty()) {
            one_mask.drop.assign(num_m, std::vector<std::uint8_t>(1, 0));
            for (std::size_t m = 0; m < num_m; ++m) one_mask.drop[m][0] = mask.drop[m][i];
        }
        const FusionTrace trace = fusion_forward(model, one, one_mask);
        const auto [loss, dlogits] = softmax_cross_entropy(trace.logits, one.labels);
        (void)loss;
        FusionGrads grads = fusion_backward(model, trace, dlogits);
        for (std::size_t m = 0; m < num_m; ++m) {
            per_encoder[m].push_back(std::move(grads.encoders[m]));
        }
    }
    return per_encoder;
}

// Scale the head gradient's per-modality W blocks by k (concatenation +
// single_linear only; the shared bias is left unscaled).
inline MlpGrads scale_head_blocks(const FusionModel& model, const MlpGrads& head_grads,
                                  const std::vector<double>& k) {
    MlpGrads scaled = head_grads;
    Matrix& dw = scaled.weight[0];
    for (std::size_t m = 0; m < model.num_modalities(); ++m) {
        if (k[m] == 1.0) continue;
        const std::size_t off = model.block_offset(m);
        const std::size_t width = model.feature_dim(m);
        for (std::size_t r = 0; r < dw.rows(); ++r) {
            double* row = dw.row(r) + off;
            for (std::size_t c = 0; c < width; ++c) row[c] *= k[m];
        }
    }
    return scaled;
}

}  // namespace detail

inline TrainResult train_run(const RunConfig& config, const Dataset& dataset) {
    config.optimizer.validate();
    config.modulation.validate();
    const MultimodalBatch& train = dataset.train;
    const MultimodalBatch& test = dataset.test;
    const std::size_t num_m = train.num_modalities();
    const std::size_t batch_size = config.optimizer.batch_size;
    check_config(batch_size <= train.size(), "train_run: batch_size exceeds training set");

    std::vector<std::size_t> input_dims;
    for (const auto& x : train.inputs) input_dims.push_back(x.cols());

    Rng init_rng(derive_seed(config.seed, stream::init));
    TrainResult result;
    result.model = build_model(config.model, input_dims, dataset.spec.num_classes, init_rng);
    FusionModel& model = result.model;

    const ModulationConfig& mod = config.modulation;
    const bool head_block_scaling = mod.modulate_head && mod.ogm_active() &&
                                    model.fusion == FusionMode::concatenation &&
                                    model.head_kind == HeadKind::single_linear;
    if (mod.modulate_head && mod.ogm_active() && !head_block_scaling) {
        warn("modulate_head requires concatenation fusion with a single_linear head; ignored");
    }

    std::vector<OptimizerState> encoder_opts;
    for (const auto& e : model.encoders) {
        encoder_opts.push_back(
            OptimizerState::for_params(e, config.optimizer.learning_rate,
                                       config.optimizer.momentum));
    }
    OptimizerState head_opt = OptimizerState::for_params(model.head,
                                                         config.optimizer.learning_rate,
                                                         config.optimizer.momentum);

    Rng shuffle_rng(derive_seed(config.seed, stream::shuffle));
    Rng mask_rng(derive_seed(config.seed, stream::opm_mask));
    Rng noise_rng(derive_seed(config.seed, stream::noise));

    ModulationState state = ModulationState::init(num_m, mod.rho_measure);
    result.log.num_modalities = num_m;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t iters_per_epoch = train.size() / batch_size;
    check_config(iters_per_epoch >= 1, "train_run: less than one batch per epoch");

    std::size_t global_iter = 0;
    for (std::size_t epoch = 1; epoch <= config.optimizer.epochs && !result.diverged; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t it = 0; it < iters_per_epoch; ++it) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(it * batch_size),
                                               order.begin() + static_cast<std::ptrdiff_t>((it + 1) * batch_size));
            const MultimodalBatch batch = train.rows(idx);

            try {
                // Feature dropout uses the previous iteration's rho.
                std::vector<double> q(num_m, 0.0);
                DropMask mask;
                if (mod.opm_active()) {
                    q = opm_drop_prob(state.prev_rho, mod);
                    mask = apply_opm_mask(q, batch_size, mask_rng);
                }

                const FusionTrace trace = fusion_forward(model, batch, mask);
                const std::vector<double> s_sums =
                    unimodal_scores(model, trace, batch.labels, mod.score_mode);
                const std::vector<double> rho = discrepancy_ratio(s_sums, mod.rho_measure);

                std::vector<double> k(num_m, 1.0);
                if (mod.strategy == Strategy::ogm || mod.strategy == Strategy::opm_plus_ogm) {
                    k = ogm_coefficient(rho, mod);
                } else if (mod.strategy == Strategy::ogm_star) {
                    k = ogm_star_coefficient(rho, mod);
                }

                const auto [loss, dlogits] = softmax_cross_entropy(trace.logits, batch.labels);
                if (!std::isfinite(loss)) {
                    warn("train_run: non-finite loss at iteration " +
                         std::to_string(global_iter + 1) + ", aborting run");
                    result.diverged = true;
                    break;
                }

                FusionGrads grads = fusion_backward(model, trace, dlogits);

                std::vector<MlpGrads> noise(num_m);
                std::vector<bool> has_noise(num_m, false);
                if (mod.ogm_active() && mod.noise_enabled) {
                    const auto per_sample = detail::per_sample_encoder_grads(model, batch, mask);
                    for (std::size_t m = 0; m < num_m; ++m) {
                        if (mod.noise_only_modulated && k[m] == 1.0) continue;
                        const MlpGrads variance = estimate_grad_variance(per_sample[m]);
                        noise[m] = sample_noise(variance, noise_rng);
                        has_noise[m] = true;
                    }
                }

                for (std::size_t m = 0; m < num_m; ++m) {
                    modulated_update(model.encoders[m], grads.encoders[m], k[m],
                                     has_noise[m] ? &noise[m] : nullptr, encoder_opts[m]);
                }
                if (head_block_scaling) {
                    const MlpGrads scaled = detail::scale_head_blocks(model, grads.head, k);
                    sgd_momentum_step(model.head, scaled, head_opt);
                } else {
                    sgd_momentum_step(model.head, grads.head, head_opt);
                }

                ++global_iter;
                result.log.add_iteration(global_iter, epoch, loss, s_sums, rho, q, k);
                state.prev_rho = rho;
                state.s_sums = s_sums;
                state.rho = rho;
                state.q = q;
                state.k = k;
            } catch (const contract_error& e) {
                warn(std::string("train_run: ") + e.what() + ", aborting run");
                result.diverged = true;
                break;
            }
        }
        if (result.diverged) break;

        try {
            const double train_acc = detail::accuracy_of(model, train);
            const double test_acc = detail::accuracy_of(model, test);
            std::vector<double> probe_acc;
            const bool probe_now =
                config.probe_every > 0 &&
                (epoch % config.probe_every == 0 || epoch == config.optimizer.epochs);
            if (probe_now) {
                for (std::size_t m = 0; m < num_m; ++m) {
                    ProbeConfig pc;
                    pc.epochs = config.probe_epochs;
                    pc.lr = config.optimizer.learning_rate;
                    pc.momentum = config.optimizer.momentum;
                    pc.batch_size = batch_size;
                    pc.seed = derive_seed(config.seed, stream::probe, epoch, m);
                    probe_acc.push_back(probe_encoder(model, m, train, test, pc));
                }
            }
            result.log.add_epoch(global_iter, epoch, train_acc, test_acc, probe_acc);
        } catch (const contract_error& e) {
            warn(std::string("train_run: ") + e.what() + ", aborting run");
            result.diverged = true;
        }
    }

    if (!result.diverged) result.metrics = evaluate(model, test);
    return result;
}

inline TrainResult train_run(const RunConfig& config) {
    return train_run(config, load_or_generate(config));
}

inline nlohmann::json metrics_to_json(const MetricsReport& m) {
    nlohmann::json j = {{"accuracy", m.accuracy}, {"mean_ap", m.mean_ap}};
    nlohmann::json aps = nlohmann::json::array();
    for (std::size_t c = 0; c < m.per_class_ap.size(); ++c) {
        if (m.ap_defined[c]) aps.push_back(m.per_class_ap[c]);
        else aps.push_back(nullptr);
    }
    j["per_class_ap"] = aps;
    if (!std::isnan(m.f1)) j["f1"] = m.f1;
    return j;
}

// Writes runlog.csv, metrics.json and checkpoint.json under out_dir.
inline void write_run_outputs(const TrainResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    result.log.write_csv((fs::path(out_dir) / "runlog.csv").string());
    std::ofstream mj(fs::path(out_dir) / "metrics.json");
    check_config(mj.good(), "write_run_outputs: cannot open metrics.json");
    nlohmann::json j = metrics_to_json(result.metrics);
    j["diverged"] = result.diverged;
    mj << j.dump(1) << "\n";
    save_checkpoint(result.model, (fs::path(out_dir) / "checkpoint.json").string());
}

struct MissingEvalRow {
    std::vector<double> miss_probs;
    double mean_accuracy = 0.0;
};

// Accuracy surface over a grid of per-modality missing probabilities,
// averaged over corruption seeds. Corruption stream for grid cell g, seed s:
// Rng(derive_seed(base_seed, stream::corruption, g, s)).
inline std::vector<MissingEvalRow> missing_modality_eval(const FusionModel& model,
                                                         const MultimodalBatch& test,
                                                         const std::vector<std::vector<double>>& grid,
                                                         std::size_t corruption_seeds,
                                                         std::uint64_t base_seed) {
    std::vector<MissingEvalRow> rows;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        MissingEvalRow row;
        row.miss_probs = grid[g];
        double acc_sum = 0.0;
        for (std::size_t s = 0; s < corruption_seeds; ++s) {
            Rng rng(derive_seed(base_seed, stream::corruption, g, s));
            const MultimodalBatch corrupted = corrupt_missing(test, grid[g], rng);
            acc_sum += detail::accuracy_of(model, corrupted);
        }
        row.mean_accuracy = acc_sum / static_cast<double>(corruption_seeds);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct SweepRow {
    std::size_t batch_size = 0;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    double final_test_acc = 0.0;
    double final_train_acc = 0.0;
    bool diverged = false;
};

// One full training run per (batch size, learning rate, seed) cell.
// Diverged cells are marked, not fatal.
inline std::vector<SweepRow> sweep_bs_lr(const RunConfig& base, const SweepConfig& sweep) {
    std::vector<SweepRow> rows;
    const Dataset dataset = load_or_generate(base);
    for (std::size_t bs : sweep.batch_sizes) {
        for (double lr : sweep.learning_rates) {
            for (std::uint64_t seed : sweep.seeds) {
                RunConfig cfg = base;
                cfg.optimizer.batch_size = bs;
                cfg.optimizer.learning_rate = lr;
                cfg.seed = seed;
                cfg.probe_every = 0;
                const TrainResult res = train_run(cfg, dataset);
                SweepRow row;
                row.batch_size = bs;
                row.learning_rate = lr;
                row.seed = seed;
                row.diverged = res.diverged;
                row.final_test_acc = res.diverged ? std::numeric_limits<double>::quiet_NaN()
                                                  : res.log.final_test_acc();
                double train_acc = std::numeric_limits<double>::quiet_NaN();
                for (auto it = res.log.rows.rbegin(); it != res.log.rows.rend(); ++it) {
                    if (it->kind == LogRow::Kind::epoch) {
                        train_acc = it->train_acc;
                        break;
                    }
                }
                row.final_train_acc = train_acc;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

struct CompareRow {
    std::uint64_t seed = 0;
    bool modulated = false;
    double final_test_acc = 0.0;
    double mean_ap = 0.0;
    std::vector<double> probe_acc;
    std::vector<double> avg_rho;
};

// Paired baseline-vs-modulated runs over a seed list. Probes always run on
// the final model regardless of the probe schedule.
inline std::vector<CompareRow> compare_runs(const RunConfig& config,
                                            const std::vector<std::uint64_t>& seeds) {
    check_config(config.modulation.strategy != Strategy::none,
                 "compare: config must select a modulation strategy");
    std::vector<CompareRow> rows;
    const Dataset dataset = load_or_generate(config);
    for (std::uint64_t seed : seeds) {
        for (bool modulated : {false, true}) {
            RunConfig cfg = config;
            cfg.seed = seed;
            if (!modulated) cfg.modulation.strategy = Strategy::none;
            const TrainResult res = train_run(cfg, dataset);
            CompareRow row;
            row.seed = seed;
            row.modulated = modulated;
            row.final_test_acc = res.metrics.accuracy;
            row.mean_ap = res.metrics.mean_ap;
            for (std::size_t m = 0; m < res.model.num_modalities(); ++m) {
                ProbeConfig pc;
                pc.epochs = cfg.probe_epochs;
                pc.lr = cfg.optimizer.learning_rate;
                pc.momentum = cfg.optimizer.momentum;
                pc.batch_size = cfg.optimizer.batch_size;
                pc.seed = derive_seed(cfg.seed, stream::probe, cfg.optimizer.epochs, m);
                row.probe_acc.push_back(
                    probe_encoder(res.model, m, dataset.train, dataset.test, pc));
                row.avg_rho.push_back(res.log.time_averaged_rho(m));
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace mmbal
