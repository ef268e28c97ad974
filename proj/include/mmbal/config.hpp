// Run configuration: one strict JSON document drives every CLI subcommand.
// Unknown keys are rejected at every level.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmbal/common.hpp"
#include "mmbal/datagen.hpp"
#include "mmbal/json_util.hpp"
#include "mmbal/modulation.hpp"

namespace mmbal {

struct DataSource {
    std::optional<SyntheticSpec> spec;  // inline synthetic spec
    std::string path;                   // or a saved dataset bundle prefix
};

struct ModelSpec {
    std::vector<std::vector<std::size_t>> encoder_layers;  // per-modality output dims
    FusionMode fusion = FusionMode::concatenation;
    HeadKind head_kind = HeadKind::single_linear;
    std::vector<std::size_t> head_hidden;  // multi_layer head hidden sizes
};

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;

    void validate() const {
        check_config(learning_rate > 0.0, "optimizer: learning_rate must be positive");
        check_config(momentum >= 0.0 && momentum < 1.0, "optimizer: momentum must be in [0,1)");
        check_config(batch_size >= 1, "optimizer: batch_size must be >= 1");
        check_config(epochs >= 1, "optimizer: epochs must be >= 1");
    }
};

struct SweepConfig {
    std::vector<std::size_t> batch_sizes;
    std::vector<double> learning_rates;
    std::vector<std::uint64_t> seeds;
};

struct MissingConfig {
    std::vector<std::vector<double>> probs;  // grid of per-modality miss probabilities
    std::size_t corruption_seeds = 3;
};

struct CompareConfig {
    std::vector<std::uint64_t> seeds;
};

struct RunConfig {
    DataSource data;
    ModelSpec model;
    OptimizerConfig optimizer;
    ModulationConfig modulation;
    std::size_t probe_every = 0;  // epochs between probes, 0 = off
    std::size_t probe_epochs = 30;
    std::uint64_t seed = 1;
    std::string output_dir;
    std::optional<SweepConfig> sweep;
    std::optional<MissingConfig> missing;
    std::optional<CompareConfig> compare;
};

namespace detail {

inline DataSource data_from_json(const nlohmann::json& j) {
    expect_keys(j, "data", {"spec", "path"});
    DataSource d;
    if (j.contains("spec")) d.spec = spec_from_json(j.at("spec"));
    if (j.contains("path")) d.path = j.at("path").get<std::string>();
    check_config(d.spec.has_value() != !d.path.empty(),
                 "data: provide exactly one of \"spec\" or \"path\"");
    return d;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
    expect_keys(j, "model", {"encoder_layers", "fusion", "head"});
    ModelSpec m;
    m.encoder_layers =
        require<std::vector<std::vector<std::size_t>>>(j, "model", "encoder_layers");
    check_config(!m.encoder_layers.empty(), "model: encoder_layers is empty");
    for (const auto& dims : m.encoder_layers) {
        check_config(!dims.empty(), "model: encoder needs at least one layer");
    }
    m.fusion = fusion_mode_from_string(optional_or<std::string>(j, "model", "fusion",
                                                                "concatenation"));
    if (j.contains("head")) {
        const auto& h = j.at("head");
        expect_keys(h, "model.head", {"type", "hidden"});
        m.head_kind = head_kind_from_string(require<std::string>(h, "model.head", "type"));
        m.head_hidden = optional_or<std::vector<std::size_t>>(h, "model.head", "hidden", {});
        if (m.head_kind == HeadKind::single_linear) {
            check_config(m.head_hidden.empty(), "model.head: single_linear takes no hidden sizes");
        } else {
            check_config(!m.head_hidden.empty(), "model.head: multi_layer needs hidden sizes");
        }
    }
    return m;
}

inline OptimizerConfig optimizer_from_json(const nlohmann::json& j) {
    expect_keys(j, "optimizer", {"learning_rate", "momentum", "batch_size", "epochs"});
    OptimizerConfig o;
    o.learning_rate = optional_or<double>(j, "optimizer", "learning_rate", o.learning_rate);
    o.momentum = optional_or<double>(j, "optimizer", "momentum", o.momentum);
    o.batch_size = optional_or<std::size_t>(j, "optimizer", "batch_size", o.batch_size);
    o.epochs = optional_or<std::size_t>(j, "optimizer", "epochs", o.epochs);
    o.validate();
    return o;
}

inline ModulationConfig modulation_from_json(const nlohmann::json& j) {
    expect_keys(j, "modulation",
                {"strategy", "q_base", "lambda", "alpha", "z", "rho_measure", "noise",
                 "score_mode", "modulate_head", "noise_only_modulated"});
    ModulationConfig m;
    m.strategy = strategy_from_string(optional_or<std::string>(j, "modulation", "strategy", "none"));
    m.q_base = optional_or<double>(j, "modulation", "q_base", m.q_base);
    m.lambda = optional_or<double>(j, "modulation", "lambda", m.lambda);
    m.alpha = optional_or<double>(j, "modulation", "alpha", m.alpha);
    m.z_fn = z_function_from_string(
        optional_or<std::string>(j, "modulation", "z", "tanh_shifted"));
    m.rho_measure = rho_measure_from_string(
        optional_or<std::string>(j, "modulation", "rho_measure", "ratio"));
    m.noise_enabled = optional_or<bool>(j, "modulation", "noise", m.noise_enabled);
    m.score_mode = score_mode_from_string(
        optional_or<std::string>(j, "modulation", "score_mode", "component_split"));
    m.modulate_head = optional_or<bool>(j, "modulation", "modulate_head", m.modulate_head);
    m.noise_only_modulated =
        optional_or<bool>(j, "modulation", "noise_only_modulated", m.noise_only_modulated);
    m.validate();
    return m;
}

inline SweepConfig sweep_from_json(const nlohmann::json& j) {
    expect_keys(j, "sweep", {"batch_sizes", "learning_rates", "seeds"});
    SweepConfig s;
    s.batch_sizes = require<std::vector<std::size_t>>(j, "sweep", "batch_sizes");
    s.learning_rates = require<std::vector<double>>(j, "sweep", "learning_rates");
    s.seeds = require<std::vector<std::uint64_t>>(j, "sweep", "seeds");
    check_config(!s.batch_sizes.empty() && !s.learning_rates.empty() && !s.seeds.empty(),
                 "sweep: empty grid");
    return s;
}

inline MissingConfig missing_from_json(const nlohmann::json& j) {
    expect_keys(j, "missing", {"probs", "corruption_seeds"});
    MissingConfig m;
    m.probs = require<std::vector<std::vector<double>>>(j, "missing", "probs");
    m.corruption_seeds = optional_or<std::size_t>(j, "missing", "corruption_seeds", 3);
    check_config(!m.probs.empty(), "missing: empty probability grid");
    check_config(m.corruption_seeds >= 1, "missing: corruption_seeds must be >= 1");
    return m;
}

inline CompareConfig compare_from_json(const nlohmann::json& j) {
    expect_keys(j, "compare", {"seeds"});
    CompareConfig c;
    c.seeds = require<std::vector<std::uint64_t>>(j, "compare", "seeds");
    check_config(!c.seeds.empty(), "compare: empty seed list");
    return c;
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    expect_keys(j, "config",
                {"data", "model", "optimizer", "modulation", "probe_every", "probe_epochs", "seed",
                 "output_dir", "sweep", "missing", "compare"});
    RunConfig c;
    check_config(j.contains("data"), "config: missing \"data\"");
    c.data = detail::data_from_json(j.at("data"));
    check_config(j.contains("model"), "config: missing \"model\"");
    c.model = detail::model_from_json(j.at("model"));
    if (j.contains("optimizer")) c.optimizer = detail::optimizer_from_json(j.at("optimizer"));
    if (j.contains("modulation")) c.modulation = detail::modulation_from_json(j.at("modulation"));
    c.probe_every = optional_or<std::size_t>(j, "config", "probe_every", 0);
    c.probe_epochs = optional_or<std::size_t>(j, "config", "probe_epochs", 30);
    c.seed = optional_or<std::uint64_t>(j, "config", "seed", 1);
    c.output_dir = optional_or<std::string>(j, "config", "output_dir", "");
    if (j.contains("sweep")) c.sweep = detail::sweep_from_json(j.at("sweep"));
    if (j.contains("missing")) c.missing = detail::missing_from_json(j.at("missing"));
    if (j.contains("compare")) c.compare = detail::compare_from_json(j.at("compare"));
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    check_config(in.good(), "cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace mmbal
