// mmbal command line: config-driven data generation, training, evaluation,
// probing, missing-modality evaluation, batch/lr sweeps and paired
// baseline-vs-modulated comparisons.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmbal/mmbal.hpp"

namespace fs = std::filesystem;
using namespace mmbal;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run config JSON file")->required();
    cmd->add_option("--out", args.out, "output directory (gen-data: bundle prefix)");
    cmd->add_option("--seed", args.seed, "override the config seed");
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (!args.out.empty()) cfg.output_dir = args.out;
    return cfg;
}

std::string resolve_out(const RunConfig& cfg) {
    return cfg.output_dir.empty() ? "." : cfg.output_dir;
}

std::string fmt(double v) { return detail::fmt_double(v); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    check_config(out.good(), "cannot open " + path);
    out << text;
}

int cmd_gen_data(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    check_config(cfg.data.spec.has_value(), "gen-data: config must carry an inline data spec");
    SyntheticSpec spec = *cfg.data.spec;
    if (args.seed) spec.seed = *args.seed;
    const Dataset ds = generate(spec);
    const std::string prefix = args.out.empty() ? "dataset" : args.out;
    if (const fs::path dir = fs::path(prefix).parent_path(); !dir.empty()) {
        fs::create_directories(dir);
    }
    save_dataset(ds, prefix);
    std::printf("wrote %s.json / %s.bin (%zu train, %zu test samples)\n", prefix.c_str(),
                prefix.c_str(), ds.train.size(), ds.test.size());
    return 0;
}

int cmd_train(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    const TrainResult result = train_run(cfg);
    const std::string out = resolve_out(cfg);
    write_run_outputs(result, out);
    std::printf("%s: final test accuracy %s, mAP %s%s -> %s\n",
                to_string(cfg.modulation.strategy).c_str(), fmt(result.metrics.accuracy).c_str(),
                fmt(result.metrics.mean_ap).c_str(), result.diverged ? " (diverged)" : "",
                out.c_str());
    return result.diverged ? 2 : 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint) {
    const RunConfig cfg = load_config(args);
    const FusionModel model = load_checkpoint(checkpoint);
    const Dataset ds = load_or_generate(cfg);
    const MetricsReport metrics = evaluate(model, ds.test);
    const std::string out = resolve_out(cfg);
    fs::create_directories(out);
    std::ofstream mj(fs::path(out) / "metrics.json");
    mj << metrics_to_json(metrics).dump(1) << "\n";
    std::printf("accuracy %s, mAP %s -> %s/metrics.json\n", fmt(metrics.accuracy).c_str(),
                fmt(metrics.mean_ap).c_str(), out.c_str());
    return 0;
}

int cmd_probe(const CommonArgs& args, const std::string& checkpoint) {
    const RunConfig cfg = load_config(args);
    const FusionModel model = load_checkpoint(checkpoint);
    const Dataset ds = load_or_generate(cfg);
    std::string csv = "modality,probe_acc\n";
    for (std::size_t m = 0; m < model.num_modalities(); ++m) {
        ProbeConfig pc;
        pc.epochs = cfg.probe_epochs;
        pc.lr = cfg.optimizer.learning_rate;
        pc.momentum = cfg.optimizer.momentum;
        pc.batch_size = cfg.optimizer.batch_size;
        pc.seed = derive_seed(cfg.seed, stream::probe, 0, m);
        const double acc = probe_encoder(model, m, ds.train, ds.test, pc);
        csv += std::to_string(m + 1) + "," + fmt(acc) + "\n";
        std::printf("modality %zu probe accuracy: %s\n", m + 1, fmt(acc).c_str());
    }
    const std::string out = resolve_out(cfg);
    fs::create_directories(out);
    write_text((fs::path(out) / "probe.csv").string(), csv);
    return 0;
}

int cmd_missing_eval(const CommonArgs& args, const std::string& checkpoint) {
    const RunConfig cfg = load_config(args);
    check_config(cfg.missing.has_value(), "missing-eval: config needs a \"missing\" section");
    const FusionModel model = load_checkpoint(checkpoint);
    const Dataset ds = load_or_generate(cfg);
    const auto rows = missing_modality_eval(model, ds.test, cfg.missing->probs,
                                            cfg.missing->corruption_seeds, cfg.seed);
    std::string csv;
    for (std::size_t m = 1; m <= model.num_modalities(); ++m) {
        csv += "miss_prob_" + std::to_string(m) + ",";
    }
    csv += "mean_accuracy\n";
    for (const auto& row : rows) {
        for (double p : row.miss_probs) csv += fmt(p) + ",";
        csv += fmt(row.mean_accuracy) + "\n";
    }
    const std::string out = resolve_out(cfg);
    fs::create_directories(out);
    write_text((fs::path(out) / "missing.csv").string(), csv);
    std::printf("%zu grid points -> %s/missing.csv\n", rows.size(), out.c_str());
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    check_config(cfg.sweep.has_value(), "sweep: config needs a \"sweep\" section");
    const auto rows = sweep_bs_lr(cfg, *cfg.sweep);
    std::string csv = "batch_size,learning_rate,seed,final_test_acc,final_train_acc,diverged\n";
    for (const auto& r : rows) {
        csv += std::to_string(r.batch_size) + "," + fmt(r.learning_rate) + "," +
               std::to_string(r.seed) + "," + (r.diverged ? "" : fmt(r.final_test_acc)) + "," +
               (r.diverged ? "" : fmt(r.final_train_acc)) + "," + (r.diverged ? "1" : "0") + "\n";
    }
    const std::string out = resolve_out(cfg);
    fs::create_directories(out);
    write_text((fs::path(out) / "sweep.csv").string(), csv);
    std::printf("%zu sweep cells -> %s/sweep.csv\n", rows.size(), out.c_str());
    return 0;
}

int cmd_compare(const CommonArgs& args) {
    const RunConfig cfg = load_config(args);
    check_config(cfg.compare.has_value(), "compare: config needs a \"compare\" section");
    const auto rows = compare_runs(cfg, cfg.compare->seeds);
    const std::size_t num_m = rows.front().probe_acc.size();

    std::string csv = "seed,variant,final_test_acc,mean_ap";
    for (std::size_t m = 1; m <= num_m; ++m) csv += ",probe_acc_" + std::to_string(m);
    for (std::size_t m = 1; m <= num_m; ++m) csv += ",avg_rho_" + std::to_string(m);
    csv += "\n";
    for (const auto& r : rows) {
        csv += std::to_string(r.seed) + "," +
               (r.modulated ? to_string(cfg.modulation.strategy) : "baseline") + "," +
               fmt(r.final_test_acc) + "," + fmt(r.mean_ap);
        for (double v : r.probe_acc) csv += "," + fmt(v);
        for (double v : r.avg_rho) csv += "," + fmt(v);
        csv += "\n";
    }

    auto mean_over = [&](bool modulated, auto field) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows) {
            if (r.modulated == modulated) {
                sum += field(r);
                ++n;
            }
        }
        return sum / static_cast<double>(n);
    };
    nlohmann::json summary;
    summary["strategy"] = to_string(cfg.modulation.strategy);
    summary["seeds"] = cfg.compare->seeds;
    for (const bool modulated : {false, true}) {
        nlohmann::json side;
        side["mean_test_acc"] =
            mean_over(modulated, [](const CompareRow& r) { return r.final_test_acc; });
        side["mean_map"] = mean_over(modulated, [](const CompareRow& r) { return r.mean_ap; });
        nlohmann::json probes = nlohmann::json::array();
        nlohmann::json rhos = nlohmann::json::array();
        for (std::size_t m = 0; m < num_m; ++m) {
            probes.push_back(
                mean_over(modulated, [m](const CompareRow& r) { return r.probe_acc[m]; }));
            rhos.push_back(mean_over(modulated, [m](const CompareRow& r) { return r.avg_rho[m]; }));
        }
        side["mean_probe_acc"] = probes;
        side["mean_avg_rho"] = rhos;
        summary[modulated ? "modulated" : "baseline"] = side;
    }

    const std::string out = resolve_out(cfg);
    fs::create_directories(out);
    write_text((fs::path(out) / "compare.csv").string(), csv);
    write_text((fs::path(out) / "compare.json").string(), summary.dump(1) + "\n");
    std::printf("baseline mean acc %s vs %s mean acc %s -> %s/compare.{csv,json}\n",
                fmt(summary["baseline"]["mean_test_acc"].get<double>()).c_str(),
                to_string(cfg.modulation.strategy).c_str(),
                fmt(summary["modulated"]["mean_test_acc"].get<double>()).c_str(), out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"balanced multimodal training harness"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, probe_args, missing_args, sweep_args, compare_args;
    std::string eval_ckpt, probe_ckpt, missing_ckpt;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset bundle");
    add_common(gen, gen_args);

    auto* train = app.add_subcommand("train", "train one run and write its outputs");
    add_common(train, train_args);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the config's test set");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint JSON")->required();

    auto* probe = app.add_subcommand("probe", "linear-probe each encoder of a checkpoint");
    add_common(probe, probe_args);
    probe->add_option("--checkpoint", probe_ckpt, "checkpoint JSON")->required();

    auto* missing = app.add_subcommand("missing-eval",
                                       "accuracy under random modality dropout at test time");
    add_common(missing, missing_args);
    missing->add_option("--checkpoint", missing_ckpt, "checkpoint JSON")->required();

    auto* sweep = app.add_subcommand("sweep", "batch-size/learning-rate grid of full runs");
    add_common(sweep, sweep_args);

    auto* compare = app.add_subcommand("compare", "paired baseline-vs-modulated report over seeds");
    add_common(compare, compare_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_args);
        if (train->parsed()) return cmd_train(train_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, eval_ckpt);
        if (probe->parsed()) return cmd_probe(probe_args, probe_ckpt);
        if (missing->parsed()) return cmd_missing_eval(missing_args, missing_ckpt);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
        if (compare->parsed()) return cmd_compare(compare_args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
