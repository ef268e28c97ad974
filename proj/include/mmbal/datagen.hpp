// Synthetic multimodal classification data.
//
// Each (class, modality) pair gets a prototype drawn once on the unit sphere
// and scaled to the per-modality separation norm; samples are the prototype
// of their class plus isotropic Gaussian noise. separation/noise_std is the
// per-modality signal-to-noise knob that makes a modality dominant.
//
// Everything derives from the spec seed through documented streams, so
// generation is bitwise reproducible and per-sample parallelizable:
//   prototypes: Rng(derive_seed(seed, stream::prototypes)), class-major then
//               modality, one normal per coordinate
//   labels:     i % C, then Fisher-Yates with
//               Rng(derive_seed(seed, stream::labels, split_tag))
//   sample i:   Rng(derive_seed(seed, stream::sample, split_tag, i)),
//               modality-major, one normal per coordinate
// split_tag: train = 1, test = 2.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmbal/common.hpp"
#include "mmbal/fusion.hpp"
#include "mmbal/json_util.hpp"
#include "mmbal/rng.hpp"

namespace mmbal {

struct SyntheticSpec {
    std::size_t num_modalities = 2;
    std::size_t num_classes = 4;
    std::vector<std::size_t> dims;
    std::vector<double> separation;
    std::vector<double> noise_std;
    std::size_t n_train = 512;
    std::size_t n_test = 256;
    std::uint64_t seed = 1;

    void validate() const {
        check_config(num_modalities >= 1, "SyntheticSpec: need at least one modality");
        check_config(num_classes >= 2, "SyntheticSpec: need at least two classes");
        check_config(dims.size() == num_modalities && separation.size() == num_modalities &&
                         noise_std.size() == num_modalities,
                     "SyntheticSpec: per-modality vectors must have length M");
        for (std::size_t d : dims) check_config(d >= 1, "SyntheticSpec: zero feature dim");
        for (double s : separation) check_config(s >= 0.0, "SyntheticSpec: negative separation");
        for (double n : noise_std) check_config(n > 0.0, "SyntheticSpec: noise_std must be positive");
        check_config(n_train >= 1 && n_test >= 1, "SyntheticSpec: empty split");
    }
};

struct Dataset {
    MultimodalBatch train;
    MultimodalBatch test;
    SyntheticSpec spec;
};

namespace detail {

inline std::vector<std::vector<std::vector<double>>> draw_prototypes(const SyntheticSpec& spec) {
    Rng rng(derive_seed(spec.seed, stream::prototypes));
    std::vector<std::vector<std::vector<double>>> protos(spec.num_classes);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        protos[c].resize(spec.num_modalities);
        for (std::size_t m = 0; m < spec.num_modalities; ++m) {
            std::vector<double> v(spec.dims[m]);
            for (double& x : v) x = rng.normal();
            if (spec.separation[m] == 0.0) {
                std::fill(v.begin(), v.end(), 0.0);
            } else {
                double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
                for (double& x : v) x = x / norm * spec.separation[m];
            }
            protos[c][m] = std::move(v);
        }
    }
    return protos;
}

inline MultimodalBatch generate_split(const SyntheticSpec& spec,
                                      const std::vector<std::vector<std::vector<double>>>& protos,
                                      std::size_t n, std::uint64_t split_tag) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % spec.num_classes);
    Rng label_rng(derive_seed(spec.seed, stream::labels, split_tag));
    label_rng.shuffle(labels);

    MultimodalBatch batch;
    batch.labels = labels;
    for (std::size_t m = 0; m < spec.num_modalities; ++m) {
        batch.inputs.emplace_back(n, spec.dims[m]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(spec.seed, stream::sample, split_tag, i));
        const auto& class_protos = protos[static_cast<std::size_t>(labels[i])];
        for (std::size_t m = 0; m < spec.num_modalities; ++m) {
            double* row = batch.inputs[m].row(i);
            for (std::size_t d = 0; d < spec.dims[m]; ++d) {
                row[d] = class_protos[m][d] + spec.noise_std[m] * rng.normal();
            }
        }
    }
    return batch;
}

}  // namespace detail

inline Dataset generate(const SyntheticSpec& spec) {
    spec.validate();
    const auto protos = detail::draw_prototypes(spec);
    Dataset ds;
    ds.spec = spec;
    ds.train = detail::generate_split(spec, protos, spec.n_train, 1);
    ds.test = detail::generate_split(spec, protos, spec.n_test, 2);
    return ds;
}

// Zeroes each (sample, modality) cell independently with probability
// miss_probs[m]. Stream layout matches apply_opm_mask: modality-major,
// skipping modalities with probability 0.
inline MultimodalBatch corrupt_missing(const MultimodalBatch& batch,
                                       const std::vector<double>& miss_probs, Rng& rng) {
    check_config(miss_probs.size() == batch.num_modalities(),
                 "corrupt_missing: probability count mismatch");
    MultimodalBatch out = batch;
    for (std::size_t m = 0; m < miss_probs.size(); ++m) {
        check_config(miss_probs[m] >= 0.0 && miss_probs[m] <= 1.0,
                     "corrupt_missing: probability out of [0,1]");
        if (miss_probs[m] == 0.0) continue;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (rng.uniform01() < miss_probs[m]) out.inputs[m].zero_row(i);
        }
    }
    return out;
}

inline nlohmann::json spec_to_json(const SyntheticSpec& s) {
    return {{"num_modalities", s.num_modalities}, {"num_classes", s.num_classes},
            {"dims", s.dims},                     {"separation", s.separation},
            {"noise_std", s.noise_std},           {"n_train", s.n_train},
            {"n_test", s.n_test},                 {"seed", s.seed}};
}

inline SyntheticSpec spec_from_json(const nlohmann::json& j) {
    expect_keys(j, "data spec",
                {"num_modalities", "num_classes", "dims", "separation", "noise_std", "n_train",
                 "n_test", "seed"});
    SyntheticSpec s;
    s.num_modalities = require<std::size_t>(j, "data spec", "num_modalities");
    s.num_classes = require<std::size_t>(j, "data spec", "num_classes");
    s.dims = require<std::vector<std::size_t>>(j, "data spec", "dims");
    s.separation = require<std::vector<double>>(j, "data spec", "separation");
    s.noise_std = require<std::vector<double>>(j, "data spec", "noise_std");
    s.n_train = require<std::size_t>(j, "data spec", "n_train");
    s.n_test = require<std::size_t>(j, "data spec", "n_test");
    s.seed = require<std::uint64_t>(j, "data spec", "seed");
    s.validate();
    return s;
}

// Bundle layout: <prefix>.json sidecar with the spec, <prefix>.bin with
// magic "MMDSBIN1" then per split (train, test): labels as int32, then each
// modality's matrix as row-major doubles. Little-endian host assumed.
inline void save_dataset(const Dataset& ds, const std::string& prefix) {
    nlohmann::json sidecar = {{"format", "mmbal-dataset"},
                              {"version", 1},
                              {"spec", spec_to_json(ds.spec)}};
    std::ofstream js(prefix + ".json");
    check_config(js.good(), "save_dataset: cannot open " + prefix + ".json");
    js << sidecar.dump(1) << "\n";

    std::ofstream bin(prefix + ".bin", std::ios::binary);
    check_config(bin.good(), "save_dataset: cannot open " + prefix + ".bin");
    bin.write("MMDSBIN1", 8);
    for (const MultimodalBatch* split : {&ds.train, &ds.test}) {
        std::vector<std::int32_t> labels(split->labels.begin(), split->labels.end());
        bin.write(reinterpret_cast<const char*>(labels.data()),
                  static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
        for (const Matrix& x : split->inputs) {
            bin.write(reinterpret_cast<const char*>(x.data().data()),
                      static_cast<std::streamsize>(x.size() * sizeof(double)));
        }
    }
    check_config(bin.good(), "save_dataset: write failed");
}

namespace detail {

inline MultimodalBatch read_split(std::ifstream& bin, const SyntheticSpec& spec, std::size_t n) {
    MultimodalBatch batch;
    std::vector<std::int32_t> labels(n);
    bin.read(reinterpret_cast<char*>(labels.data()),
             static_cast<std::streamsize>(n * sizeof(std::int32_t)));
    batch.labels.assign(labels.begin(), labels.end());
    for (std::size_t m = 0; m < spec.num_modalities; ++m) {
        Matrix x(n, spec.dims[m]);
        bin.read(reinterpret_cast<char*>(x.data().data()),
                 static_cast<std::streamsize>(x.size() * sizeof(double)));
        batch.inputs.push_back(std::move(x));
    }
    check_config(bin.good(), "load_dataset: truncated binary file");
    return batch;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& prefix) {
    std::ifstream js(prefix + ".json");
    check_config(js.good(), "load_dataset: cannot open " + prefix + ".json");
    nlohmann::json sidecar;
    js >> sidecar;
    check_config(sidecar.value("format", "") == "mmbal-dataset", "load_dataset: bad format tag");
    check_config(sidecar.value("version", 0) == 1, "load_dataset: unsupported version");
    const SyntheticSpec spec = spec_from_json(sidecar.at("spec"));

    std::ifstream bin(prefix + ".bin", std::ios::binary);
    check_config(bin.good(), "load_dataset: cannot open " + prefix + ".bin");
    char magic[8];
    bin.read(magic, 8);
    check_config(bin.good() && std::memcmp(magic, "MMDSBIN1", 8) == 0,
                 "load_dataset: bad magic in " + prefix + ".bin");
    Dataset ds;
    ds.spec = spec;
    ds.train = detail::read_split(bin, spec, spec.n_train);
    ds.test = detail::read_split(bin, spec, spec.n_test);
    return ds;
}

}  // namespace mmbal
