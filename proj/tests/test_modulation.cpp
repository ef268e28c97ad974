#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mmbal/fusion.hpp"
#include "mmbal/modulation.hpp"
#include "mmbal/rng.hpp"

using namespace mmbal;

namespace {

MlpParams identity_encoder(std::size_t dim) {
    DenseLayer l;
    l.weight = Matrix(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) l.weight(i, i) = 1.0;
    l.bias.assign(dim, 0.0);
    return MlpParams{{l}};
}

// Identity encoders + identity-block head: each modality's component equals
// its raw input, so score fixtures can be written directly.
FusionModel passthrough_model(std::size_t classes) {
    FusionModel model;
    model.encoders = {identity_encoder(classes), identity_encoder(classes)};
    model.fusion = FusionMode::concatenation;
    model.head_kind = HeadKind::single_linear;
    model.num_classes = classes;
    DenseLayer head;
    head.weight = Matrix(classes, 2 * classes);
    for (std::size_t c = 0; c < classes; ++c) {
        head.weight(c, c) = 1.0;
        head.weight(c, classes + c) = 1.0;
    }
    head.bias.assign(classes, 0.0);
    model.head = MlpParams{{head}};
    return model;
}

ModulationConfig base_config(Strategy s = Strategy::opm) {
    ModulationConfig c;
    c.strategy = s;
    return c;
}

MlpGrads scalar_grads(double v) {
    MlpGrads g;
    g.weight.emplace_back(1, 1, v);
    g.bias.emplace_back(1, v);
    return g;
}

}  // namespace

TEST_CASE("unimodal scores from component logits") {
    const FusionModel model = passthrough_model(2);
    MultimodalBatch batch;
    SECTION("symmetric softmax gives s = 0.5") {
        batch.inputs = {Matrix::from_rows({{0, 0}}), Matrix::from_rows({{0, 0}})};
        batch.labels = {0};
        const FusionTrace trace = fusion_forward(model, batch);
        const auto s = unimodal_scores(model, trace, batch.labels, ScoreMode::component_split);
        CHECK_THAT(s[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
        CHECK_THAT(s[1], Catch::Matchers::WithinAbs(0.5, 1e-12));
    }
    SECTION("component [2,0]") {
        batch.inputs = {Matrix::from_rows({{2, 0}}), Matrix::from_rows({{0, 0}})};
        SECTION("true class favored") {
            batch.labels = {0};
            const FusionTrace trace = fusion_forward(model, batch);
            const auto s = unimodal_scores(model, trace, batch.labels, ScoreMode::component_split);
            CHECK_THAT(s[0], Catch::Matchers::WithinAbs(0.8807970779778824, 1e-12));
        }
        SECTION("true class disfavored") {
            batch.labels = {1};
            const FusionTrace trace = fusion_forward(model, batch);
            const auto s = unimodal_scores(model, trace, batch.labels, ScoreMode::component_split);
            CHECK_THAT(s[0], Catch::Matchers::WithinAbs(0.11920292202211757, 1e-12));
        }
    }
    SECTION("scores computed from unmasked features") {
        batch.inputs = {Matrix::from_rows({{2, 0}}), Matrix::from_rows({{0, 0}})};
        batch.labels = {0};
        DropMask mask;
        mask.drop = {{1}, {0}};  // modality 0 dropped in the fused path
        const FusionTrace trace = fusion_forward(model, batch, mask);
        const auto s = unimodal_scores(model, trace, batch.labels, ScoreMode::component_split);
        CHECK_THAT(s[0], Catch::Matchers::WithinAbs(0.8807970779778824, 1e-12));
    }
    SECTION("zero_out mode agrees on a zero-bias single-linear model") {
        batch.inputs = {Matrix::from_rows({{2, 0}, {1, -1}}), Matrix::from_rows({{0, 1}, {0, 0}})};
        batch.labels = {0, 1};
        const FusionTrace trace = fusion_forward(model, batch);
        const auto a = unimodal_scores(model, trace, batch.labels, ScoreMode::component_split);
        const auto b = unimodal_scores(model, trace, batch.labels, ScoreMode::zero_out);
        CHECK_THAT(a[0], Catch::Matchers::WithinAbs(b[0], 1e-12));
        CHECK_THAT(a[1], Catch::Matchers::WithinAbs(b[1], 1e-12));
    }
}

TEST_CASE("scores stay in (0,1) per sample") {
    Rng rng(55);
    const FusionModel model = passthrough_model(3);
    for (int trial = 0; trial < 10; ++trial) {
        MultimodalBatch batch;
        const std::size_t n = 1 + rng.bounded(8);
        for (int m = 0; m < 2; ++m) {
            Matrix x(n, 3);
            for (double& v : x.data()) v = 20.0 * (rng.uniform01() - 0.5);
            batch.inputs.push_back(std::move(x));
        }
        batch.labels.resize(n);
        for (auto& y : batch.labels) y = static_cast<int>(rng.bounded(3));
        const FusionTrace trace = fusion_forward(model, batch);
        const auto s = unimodal_scores(model, trace, batch.labels, ScoreMode::component_split);
        for (double v : s) {
            CHECK(v > 0.0);
            CHECK(v < static_cast<double>(n));
        }
    }
}

TEST_CASE("discrepancy ratio") {
    SECTION("two modalities, ratio mode") {
        const auto rho = discrepancy_ratio({0.9, 0.3}, RhoMeasure::ratio);
        CHECK_THAT(rho[0], Catch::Matchers::WithinAbs(3.0, 1e-12));
        CHECK_THAT(rho[1], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
    }
    SECTION("equal scores give 1") {
        const auto rho = discrepancy_ratio({0.4, 0.4, 0.4}, RhoMeasure::ratio);
        for (double r : rho) CHECK_THAT(r, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("three modalities") {
        const auto rho = discrepancy_ratio({0.6, 0.3, 0.2}, RhoMeasure::ratio);
        CHECK_THAT(rho[0], Catch::Matchers::WithinAbs(2.5, 1e-12));
    }
    SECTION("difference mode") {
        const auto rho = discrepancy_ratio({0.9, 0.3}, RhoMeasure::difference);
        CHECK_THAT(rho[0], Catch::Matchers::WithinAbs(0.6, 1e-12));
        CHECK_THAT(rho[1], Catch::Matchers::WithinAbs(-0.6, 1e-12));
    }
    SECTION("reciprocal identity for M=2 ratio mode") {
        Rng rng(5);
        for (int t = 0; t < 50; ++t) {
            const double a = 0.05 + rng.uniform01() * 10.0;
            const double b = 0.05 + rng.uniform01() * 10.0;
            const auto rho = discrepancy_ratio({a, b}, RhoMeasure::ratio);
            CHECK_THAT(rho[0] * rho[1], Catch::Matchers::WithinAbs(1.0, 1e-12));
        }
    }
    SECTION("zero denominator is clamped") {
        const auto rho = discrepancy_ratio({0.5, 0.0}, RhoMeasure::ratio);
        CHECK(rho[0] == 0.5 / 1e-12);
    }
}

TEST_CASE("opm drop probability") {
    ModulationConfig cfg = base_config();
    SECTION("not dominant gives zero") {
        const auto q = opm_drop_prob({1.0, 1.0}, cfg);
        CHECK(q[0] == 0.0);
        CHECK(q[1] == 0.0);
    }
    SECTION("documented example") {
        cfg.q_base = 0.5;
        cfg.lambda = 0.5;
        const auto q = opm_drop_prob({1.5, 1.0 / 1.5}, cfg);
        CHECK_THAT(q[0], Catch::Matchers::WithinAbs(0.6155292893150024, 1e-9));
        CHECK(q[1] == 0.0);
    }
    SECTION("clamped to 1 exactly") {
        cfg.q_base = 0.9;
        cfg.lambda = 1.0;
        const auto q = opm_drop_prob({1e9}, cfg);
        CHECK(q[0] == 1.0);
    }
    SECTION("continuity at the threshold from above") {
        cfg.q_base = 0.5;
        cfg.lambda = 0.5;
        const auto q = opm_drop_prob({1.0 + 1e-7}, cfg);
        CHECK_THAT(q[0], Catch::Matchers::WithinAbs(cfg.q_base, 1e-6));
    }
    SECTION("monotone non-decreasing in rho") {
        cfg.q_base = 0.3;
        cfg.lambda = 2.0;
        double prev = 0.0;
        for (double rho = 1.01; rho <= 10.0; rho += 0.09) {
            const auto q = opm_drop_prob({rho}, cfg);
            CHECK(q[0] >= prev);
            prev = q[0];
        }
    }
    SECTION("sigmoid variant applies z to rho directly") {
        cfg.z_fn = ZFunction::sigmoid;
        cfg.q_base = 0.5;
        cfg.lambda = 0.5;
        const auto q = opm_drop_prob({2.0}, cfg);
        const double expected = 0.5 * (1.0 + 0.5 / (1.0 + std::exp(-2.0)));
        CHECK_THAT(q[0], Catch::Matchers::WithinAbs(expected, 1e-12));
    }
    SECTION("difference mode threshold is zero") {
        cfg.rho_measure = RhoMeasure::difference;
        const auto q = opm_drop_prob({0.0, -0.5}, cfg);
        CHECK(q[0] == 0.0);
        CHECK(q[1] == 0.0);
        const auto q2 = opm_drop_prob({0.5}, cfg);
        CHECK(q2[0] > 0.0);
    }
}

TEST_CASE("opm mask replay and edge cases") {
    SECTION("q = 0 draws nothing") {
        Rng rng(123);
        const DropMask mask = apply_opm_mask({0.0, 0.0}, 16, rng);
        for (const auto& col : mask.drop) {
            for (auto d : col) CHECK(d == 0);
        }
        Rng fresh(123);
        CHECK(rng.raw() == fresh.raw());  // stream untouched
    }
    SECTION("q = 1 masks everything") {
        Rng rng(123);
        const DropMask mask = apply_opm_mask({1.0}, 8, rng);
        for (auto d : mask.drop[0]) CHECK(d == 1);
    }
    SECTION("replay of the documented stream") {
        Rng rng(4242);
        const DropMask mask = apply_opm_mask({0.5, 0.0, 0.25}, 10, rng);
        Rng replay(4242);
        for (std::size_t m = 0; m < 3; ++m) {
            const double q = m == 0 ? 0.5 : m == 1 ? 0.0 : 0.25;
            for (std::size_t i = 0; i < 10; ++i) {
                const bool expect = q > 0.0 && replay.uniform01() < q;
                CHECK(mask.drop[m][i] == (expect ? 1 : 0));
            }
        }
    }
}

TEST_CASE("ogm coefficient") {
    ModulationConfig cfg = base_config(Strategy::ogm);
    SECTION("not dominant gives one") {
        const auto k = ogm_coefficient({1.0, 0.5}, cfg);
        CHECK(k[0] == 1.0);
        CHECK(k[1] == 1.0);
    }
    SECTION("documented example") {
        cfg.alpha = 0.1;
        const auto k = ogm_coefficient({2.0}, cfg);
        CHECK_THAT(k[0], Catch::Matchers::WithinAbs(0.9238405844044235, 1e-9));
    }
    SECTION("clamped to 0 exactly") {
        cfg.alpha = 1.5;
        const auto k = ogm_coefficient({1e9}, cfg);
        CHECK(k[0] == 0.0);
    }
    SECTION("continuity at the threshold from above") {
        const auto k = ogm_coefficient({1.0 + 1e-7}, cfg);
        CHECK_THAT(k[0], Catch::Matchers::WithinAbs(1.0, 1e-6));
    }
    SECTION("monotone non-increasing in rho") {
        cfg.alpha = 0.8;
        double prev = 1.0;
        for (double rho = 1.01; rho <= 10.0; rho += 0.09) {
            const auto k = ogm_coefficient({rho}, cfg);
            CHECK(k[0] <= prev);
            prev = k[0];
        }
    }
}

TEST_CASE("ogm star coefficient") {
    ModulationConfig cfg = base_config(Strategy::ogm_star);
    cfg.alpha = 0.1;
    SECTION("balanced modalities untouched") {
        const auto k = ogm_star_coefficient({1.0, 1.0}, cfg);
        CHECK(k[0] == 1.0);
        CHECK(k[1] == 1.0);
    }
    SECTION("weak modality boosted by the mirrored formula") {
        const auto k = ogm_star_coefficient({2.0, 0.5}, cfg);
        CHECK(k[0] == 1.0);
        CHECK_THAT(k[1], Catch::Matchers::WithinAbs(1.0761594155955765, 1e-9));
    }
    SECTION("dominant coefficient is exactly one") {
        for (double rho : {1.5, 3.0, 100.0}) {
            const auto k = ogm_star_coefficient({rho, 1.0 / rho}, cfg);
            CHECK(k[0] == 1.0);
            CHECK(k[1] >= 1.0);
        }
    }
}

TEST_CASE("gradient variance estimation") {
    SECTION("documented two-sample example") {
        const auto var = estimate_grad_variance({scalar_grads(1.0), scalar_grads(3.0)});
        CHECK_THAT(var.weight[0](0, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
        CHECK_THAT(var.bias[0][0], Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("identical gradients give zero variance") {
        const auto var = estimate_grad_variance(
            {scalar_grads(2.5), scalar_grads(2.5), scalar_grads(2.5)});
        CHECK(var.weight[0](0, 0) == 0.0);
    }
    SECTION("variance is homogeneous of degree two") {
        const auto v1 = estimate_grad_variance({scalar_grads(1.0), scalar_grads(3.0)});
        const auto v3 = estimate_grad_variance({scalar_grads(3.0), scalar_grads(9.0)});
        CHECK_THAT(v3.weight[0](0, 0), Catch::Matchers::WithinAbs(9.0 * v1.weight[0](0, 0), 1e-12));
    }
    SECTION("batch of one gives zero variance") {
        const auto var = estimate_grad_variance({scalar_grads(7.0)});
        CHECK(var.weight[0](0, 0) == 0.0);
    }
}

TEST_CASE("noise sampling") {
    SECTION("zero variance gives exact zero noise and no draws") {
        MlpGrads var = scalar_grads(0.0);
        Rng rng(9);
        const auto noise = sample_noise(var, rng);
        CHECK(noise.weight[0](0, 0) == 0.0);
        Rng fresh(9);
        CHECK(rng.raw() == fresh.raw());
    }
    SECTION("statistics match the requested variance") {
        MlpGrads var;
        var.weight.emplace_back(1, 2);
        var.weight[0](0, 0) = 1.0;
        var.weight[0](0, 1) = 4.0;
        var.bias.emplace_back();
        Rng rng(2024);
        const std::size_t n = 100000;
        double sum0 = 0, sq0 = 0, sq1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto noise = sample_noise(var, rng);
            const double a = noise.weight[0](0, 0);
            const double b = noise.weight[0](0, 1);
            sum0 += a;
            sq0 += a * a;
            sq1 += b * b;
        }
        const double mean0 = sum0 / n;
        const double var0 = sq0 / n - mean0 * mean0;
        const double var1 = sq1 / n;
        CHECK(std::abs(mean0) < 0.02);
        CHECK(var0 > 0.97);
        CHECK(var0 < 1.03);
        CHECK_THAT(std::sqrt(var1 / var0), Catch::Matchers::WithinAbs(2.0, 0.1));
    }
}

TEST_CASE("modulated update") {
    auto make = [] {
        MlpParams p;
        DenseLayer l;
        l.weight = Matrix(1, 1);
        l.weight(0, 0) = 1.0;
        l.bias.assign(1, 0.0);
        p.layers.push_back(l);
        return p;
    };
    SECTION("k=1 without noise is bitwise the vanilla update") {
        MlpParams a = make(), b = make();
        OptimizerState sa = OptimizerState::for_params(a, 0.1, 0.9);
        OptimizerState sb = OptimizerState::for_params(b, 0.1, 0.9);
        const MlpGrads g = scalar_grads(0.37);
        modulated_update(a, g, 1.0, nullptr, sa);
        sgd_momentum_step(b, g, sb, 1.0);
        CHECK(a.layers[0].weight(0, 0) == b.layers[0].weight(0, 0));
    }
    SECTION("k=0 without noise leaves parameters unchanged from rest") {
        MlpParams p = make();
        OptimizerState st = OptimizerState::for_params(p, 0.1, 0.9);
        modulated_update(p, scalar_grads(5.0), 0.0, nullptr, st);
        CHECK(p.layers[0].weight(0, 0) == 1.0);
    }
    SECTION("k=0.5, no momentum: exactly half the vanilla step") {
        MlpParams p = make();
        OptimizerState st = OptimizerState::for_params(p, 0.1, 0.0);
        modulated_update(p, scalar_grads(2.0), 0.5, nullptr, st);
        CHECK(p.layers[0].weight(0, 0) == 1.0 - 0.1 * 0.5 * 2.0);
    }
    SECTION("noise is added to the scaled gradient") {
        MlpParams p = make();
        OptimizerState st = OptimizerState::for_params(p, 0.1, 0.0);
        MlpGrads noise = scalar_grads(0.25);
        modulated_update(p, scalar_grads(2.0), 0.5, &noise, st);
        CHECK_THAT(p.layers[0].weight(0, 0),
                   Catch::Matchers::WithinAbs(1.0 - 0.1 * (0.5 * 2.0 + 0.25), 1e-15));
    }
}
