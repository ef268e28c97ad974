#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "mmbal/trainer.hpp"

using namespace mmbal;

namespace {

// Small, quickly learnable two-modality problem with a dominant modality.
RunConfig quick_config(Strategy strategy = Strategy::none) {
    RunConfig c;
    SyntheticSpec spec;
    spec.num_modalities = 2;
    spec.num_classes = 4;
    spec.dims = {6, 6};
    spec.separation = {3.0, 1.0};
    spec.noise_std = {1.0, 1.0};
    spec.n_train = 96;
    spec.n_test = 64;
    spec.seed = 5;
    c.data.spec = spec;
    c.model.encoder_layers = {{16, 8}, {16, 8}};
    c.optimizer.learning_rate = 0.02;
    c.optimizer.momentum = 0.9;
    c.optimizer.batch_size = 32;
    c.optimizer.epochs = 6;
    c.modulation.strategy = strategy;
    c.seed = 21;
    return c;
}

}  // namespace

TEST_CASE("short baseline run learns and logs") {
    RunConfig cfg = quick_config();
    cfg.optimizer.epochs = 25;
    const TrainResult res = train_run(cfg);
    CHECK_FALSE(res.diverged);

    double final_train = 0.0;
    for (auto it = res.log.rows.rbegin(); it != res.log.rows.rend(); ++it) {
        if (it->kind == LogRow::Kind::epoch) {
            final_train = it->train_acc;
            break;
        }
    }
    CHECK(final_train > 0.9);

    // iteration rows strictly increasing, row counter strictly increasing
    std::size_t prev_row = 0, prev_iter = 0;
    for (const auto& r : res.log.rows) {
        CHECK(r.row == prev_row + 1);
        prev_row = r.row;
        if (r.kind == LogRow::Kind::iteration) {
            CHECK(r.iter == prev_iter + 1);
            prev_iter = r.iter;
        } else {
            CHECK(r.iter == prev_iter);
        }
    }
}

TEST_CASE("identical configs give identical runlog bytes") {
    const RunConfig cfg = quick_config(Strategy::opm);
    const std::string a = train_run(cfg).log.to_csv();
    const std::string b = train_run(cfg).log.to_csv();
    REQUIRE(a == b);
}

TEST_CASE("degenerate strategies reproduce the baseline bitwise") {
    const std::string baseline = train_run(quick_config(Strategy::none)).log.to_csv();

    SECTION("opm with q_base = 0") {
        RunConfig cfg = quick_config(Strategy::opm);
        cfg.modulation.q_base = 0.0;
        REQUIRE(train_run(cfg).log.to_csv() == baseline);
    }
    SECTION("ogm with alpha = 0 and noise off") {
        RunConfig cfg = quick_config(Strategy::ogm);
        cfg.modulation.alpha = 0.0;
        cfg.modulation.noise_enabled = false;
        REQUIRE(train_run(cfg).log.to_csv() == baseline);
    }
}

TEST_CASE("modulation traces respect bounds every iteration") {
    for (const Strategy strategy : {Strategy::opm, Strategy::ogm, Strategy::ogm_star,
                                    Strategy::opm_plus_ogm}) {
        RunConfig cfg = quick_config(strategy);
        const TrainResult res = train_run(cfg);
        for (const auto& r : res.log.rows) {
            if (r.kind != LogRow::Kind::iteration) continue;
            for (std::size_t m = 0; m < 2; ++m) {
                CHECK(r.q[m] >= 0.0);
                CHECK(r.q[m] <= 1.0);
                if (strategy == Strategy::ogm_star) {
                    CHECK(r.k[m] >= 1.0);
                } else {
                    CHECK(r.k[m] >= 0.0);
                    CHECK(r.k[m] <= 1.0);
                }
                CHECK(r.rho[m] > 0.0);
            }
            CHECK_THAT(r.rho[0] * r.rho[1], Catch::Matchers::WithinAbs(1.0, 1e-9));
        }
    }
}

TEST_CASE("probe schedule appends probe rows") {
    RunConfig cfg = quick_config();
    cfg.optimizer.epochs = 4;
    cfg.probe_every = 2;
    cfg.probe_epochs = 5;
    const TrainResult res = train_run(cfg);
    std::size_t probed = 0;
    for (const auto& r : res.log.rows) {
        if (r.kind == LogRow::Kind::epoch && !r.probe_acc.empty()) {
            ++probed;
            CHECK(r.probe_acc.size() == 2);
            CHECK((r.epoch % 2 == 0 || r.epoch == 4));
        }
    }
    CHECK(probed == 2);  // epochs 2 and 4
}

TEST_CASE("missing modality evaluation") {
    RunConfig cfg = quick_config();
    cfg.optimizer.epochs = 15;
    const Dataset ds = load_or_generate(cfg);
    const TrainResult res = train_run(cfg, ds);

    SECTION("zero probabilities equal clean accuracy") {
        const auto rows = missing_modality_eval(res.model, ds.test, {{0.0, 0.0}}, 3, 42);
        CHECK(rows[0].mean_accuracy == res.metrics.accuracy);
    }
    SECTION("all-missing collapses to the majority-class rate") {
        const auto rows = missing_modality_eval(res.model, ds.test, {{1.0, 1.0}}, 1, 42);
        std::vector<std::size_t> counts(ds.spec.num_classes, 0);
        for (int y : ds.test.labels) counts[static_cast<std::size_t>(y)]++;
        const double max_freq =
            static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
            static_cast<double>(ds.test.size());
        CHECK(rows[0].mean_accuracy <= max_freq + 1e-12);
    }
}

TEST_CASE("sweep") {
    RunConfig cfg = quick_config();
    cfg.optimizer.epochs = 3;
    SECTION("degenerate one-cell grid matches a single run") {
        SweepConfig grid;
        grid.batch_sizes = {32};
        grid.learning_rates = {0.02};
        grid.seeds = {21};
        const auto rows = sweep_bs_lr(cfg, grid);
        REQUIRE(rows.size() == 1);
        const TrainResult single = train_run(cfg);
        CHECK(rows[0].final_test_acc == single.log.final_test_acc());
    }
    SECTION("row count is grid size times seed count") {
        SweepConfig grid;
        grid.batch_sizes = {16, 32};
        grid.learning_rates = {0.02, 1e-4};
        grid.seeds = {1, 2, 3};
        CHECK(sweep_bs_lr(cfg, grid).size() == 12);
    }
}

TEST_CASE("divergence aborts while preserving the log") {
    RunConfig cfg = quick_config();
    // one step blows parameters past 1e150; the next forward overflows
    cfg.optimizer.learning_rate = 1e154;
    cfg.optimizer.epochs = 10;
    const TrainResult res = train_run(cfg);
    CHECK(res.diverged);
    CHECK_FALSE(res.log.rows.empty());
    for (const auto& r : res.log.rows) {
        if (r.kind == LogRow::Kind::iteration) CHECK(std::isfinite(r.loss));
    }
}

TEST_CASE("run outputs are written and loadable") {
    RunConfig cfg = quick_config();
    cfg.optimizer.epochs = 2;
    const TrainResult res = train_run(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "mmbal_run_out";
    write_run_outputs(res, dir.string());
    CHECK(std::filesystem::exists(dir / "runlog.csv"));
    CHECK(std::filesystem::exists(dir / "metrics.json"));
    const FusionModel loaded = load_checkpoint((dir / "checkpoint.json").string());
    CHECK(loaded.num_modalities() == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("csv schema") {
    RunConfig cfg = quick_config();
    cfg.optimizer.epochs = 1;
    const TrainResult res = train_run(cfg);
    const std::string csv = res.log.to_csv();
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header ==
          "row,type,iter,epoch,loss,s_sum_1,s_sum_2,rho_1,rho_2,q_1,q_2,k_1,k_2,"
          "train_acc,test_acc,probe_acc_1,probe_acc_2");
    // every row has the same field count
    const std::size_t commas = static_cast<std::size_t>(
        std::count(header.begin(), header.end(), ','));
    std::size_t pos = header.size() + 1;
    while (pos < csv.size()) {
        const std::size_t end = csv.find('\n', pos);
        const std::string line = csv.substr(pos, end - pos);
        CHECK(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) == commas);
        pos = end + 1;
    }
}
