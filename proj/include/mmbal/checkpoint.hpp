// Versioned JSON checkpoint for FusionModel.
//
// Layout (format "mmbal-checkpoint", version 1):
//   fusion, head_type, num_classes, feature_dims
//   encoders: [ { layers: [ {activation, in, out, weight(row-major), bias} ] } ]
//   head:     { layers: [ ... ] }
// Doubles round-trip exactly through nlohmann::json's shortest-repr output.
#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "mmbal/common.hpp"
#include "mmbal/fusion.hpp"

namespace mmbal {

namespace detail {

inline nlohmann::json layer_to_json(const DenseLayer& l) {
    return {{"activation", to_string(l.activation)},
            {"in", l.in_dim()},
            {"out", l.out_dim()},
            {"weight", l.weight.data()},
            {"bias", l.bias}};
}

inline DenseLayer layer_from_json(const nlohmann::json& j) {
    DenseLayer l;
    const std::size_t in = j.at("in").get<std::size_t>();
    const std::size_t out = j.at("out").get<std::size_t>();
    l.activation = activation_from_string(j.at("activation").get<std::string>());
    l.weight = Matrix(out, in);
    const auto w = j.at("weight").get<std::vector<double>>();
    check_config(w.size() == out * in, "checkpoint: weight length != in*out");
    l.weight.data() = w;
    l.bias = j.at("bias").get<std::vector<double>>();
    check_config(l.bias.size() == out, "checkpoint: bias length != out");
    return l;
}

inline nlohmann::json mlp_to_json(const MlpParams& p) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : p.layers) layers.push_back(layer_to_json(l));
    return {{"layers", layers}};
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
    MlpParams p;
    for (const auto& lj : j.at("layers")) p.layers.push_back(layer_from_json(lj));
    p.validate();
    return p;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const FusionModel& model) {
    model.validate();
    nlohmann::json encoders = nlohmann::json::array();
    nlohmann::json feature_dims = nlohmann::json::array();
    for (const auto& e : model.encoders) {
        encoders.push_back(detail::mlp_to_json(e));
        feature_dims.push_back(e.out_dim());
    }
    return {{"format", "mmbal-checkpoint"},
            {"version", 1},
            {"fusion", to_string(model.fusion)},
            {"head_type", to_string(model.head_kind)},
            {"num_classes", model.num_classes},
            {"feature_dims", feature_dims},
            {"encoders", encoders},
            {"head", detail::mlp_to_json(model.head)}};
}

inline FusionModel checkpoint_from_json(const nlohmann::json& j) {
    check_config(j.value("format", "") == "mmbal-checkpoint", "checkpoint: bad format tag");
    check_config(j.value("version", 0) == 1, "checkpoint: unsupported version");
    FusionModel model;
    model.fusion = fusion_mode_from_string(j.at("fusion").get<std::string>());
    model.head_kind = head_kind_from_string(j.at("head_type").get<std::string>());
    model.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& ej : j.at("encoders")) model.encoders.push_back(detail::mlp_from_json(ej));
    model.head = detail::mlp_from_json(j.at("head"));
    model.validate();
    return model;
}

inline void save_checkpoint(const FusionModel& model, const std::string& path) {
    std::ofstream out(path);
    check_config(out.good(), "save_checkpoint: cannot open " + path);
    out << checkpoint_to_json(model).dump(1) << "\n";
}

inline FusionModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    check_config(in.good(), "load_checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return checkpoint_from_json(j);
}

}  // namespace mmbal
