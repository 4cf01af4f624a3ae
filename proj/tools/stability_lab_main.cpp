// stability-lab: experiments for measuring the dynamical stability of
// SGD/GD minima and the sharpness/norm equivalences of two-layer ReLU
// and diagonal linear networks.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stabilitylab/experiments.hpp"
#include "stabilitylab/serialize.hpp"

namespace slab = stabilitylab;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
    std::vector<double> lr_grid;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file (defaults used when absent)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seeds", args.seeds, "seed list")->delimiter(',');
    cmd->add_option("--lr-grid", args.lr_grid, "learning-rate grid")->delimiter(',');
    cmd->add_option("--workers", args.workers, "worker threads (0 = hardware)");
}

slab::ExperimentConfig resolve_config(const std::string& experiment, const CommonArgs& args) {
    slab::ExperimentConfig cfg = args.config_path.empty()
                                     ? slab::default_config(experiment)
                                     : slab::load_config(args.config_path);
    cfg.experiment = experiment;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.seeds.empty()) cfg.seeds = args.seeds;
    if (!args.lr_grid.empty()) cfg.lr_grid = args.lr_grid;
    if (args.workers > 0) cfg.workers = args.workers;
    if (cfg.out_dir.empty()) cfg.out_dir = "out_" + experiment;
    return cfg;
}

int run_classify(const CommonArgs& args, const std::string& run_path, double eta, bool simulate) {
    json run_json = slab::load_json(run_path);
    if (!run_json.contains("record") || !run_json.contains("provenance")) {
        std::cerr << "classify: " << run_path << " lacks record/provenance\n";
        return 2;
    }
    slab::RunRecord record = run_json.at("record").get<slab::RunRecord>();
    auto provenance = run_json.at("provenance");
    slab::ExperimentConfig cfg = provenance.at("config").get<slab::ExperimentConfig>();
    std::uint64_t seed = provenance.at("seed").get<std::uint64_t>();

    auto data = slab::make_experiment_data(cfg.data, seed);
    slab::ClassifyOptions options;
    options.force = true;
    options.simulate = simulate;
    options.seed = seed;
    double rate = eta > 0.0 ? eta : record.config.learning_rate;

    slab::StabilityVerdict verdict;
    if (record.final_params.family == "relu") {
        verdict = slab::classify_minimum(slab::relu_from_blob(record.final_params), data.train,
                                         rate, options);
    } else {
        verdict = slab::classify_minimum(slab::diag_from_blob(record.final_params), data.train,
                                         rate, options);
    }

    std::filesystem::path out_dir(args.out_dir.empty() ? "." : args.out_dir);
    std::filesystem::create_directories(out_dir);
    auto out_path = out_dir / "verdict.json";
    slab::save_json(json(verdict), out_path);

    std::printf("trace check:    %s (margin %.6g)\n", verdict.trace_check.ok ? "pass" : "FAIL",
                verdict.trace_check.margin);
    std::printf("spectral check: %s (margin %.6g)\n", verdict.spectral_check.ok ? "pass" : "FAIL",
                verdict.spectral_check.margin);
    std::printf("loss check:     %s (margin %.6g, mu0 %.6g)\n",
                verdict.loss_check.ok ? "pass" : "FAIL", verdict.loss_check.margin,
                verdict.mu0_used);
    std::printf("rank-one gaps:  %d negative / %d probes\n", verdict.negative_gaps, verdict.probes);
    if (verdict.simulated)
        std::printf("simulation:     %s (growth %.6g/step)\n",
                    slab::to_string(verdict.sim_verdict).c_str(), verdict.sim_growth_rate);
    std::printf("verdict written to %s\n", out_path.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stability-lab: dynamical stability of SGD at interpolating minima"};
    app.require_subcommand(1);

    const std::vector<std::string> experiments = {"relu-process", "relu-sweep", "diag-sweep",
                                                  "diag-balance", "verify-equivalence"};
    std::map<std::string, CommonArgs> exp_args;
    for (const auto& name : experiments) {
        auto* cmd = app.add_subcommand(name, "run the " + name + " experiment");
        add_common(cmd, exp_args[name]);
    }

    CommonArgs classify_args;
    std::string classify_run;
    double classify_eta = 0.0;
    bool classify_simulate = false;
    auto* classify_cmd =
        app.add_subcommand("classify", "stability verdict for a recorded run's final parameters");
    add_common(classify_cmd, classify_args);
    classify_cmd->add_option("--run", classify_run, "run JSON produced by an experiment")
        ->required();
    classify_cmd->add_option("--eta", classify_eta, "learning rate to test (default: the run's)");
    classify_cmd->add_flag("--simulate", classify_simulate, "also run the linearized simulation");

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& name : experiments) {
            if (app.got_subcommand(name)) {
                auto cfg = resolve_config(name, exp_args[name]);
                std::filesystem::create_directories(cfg.out_dir);
                slab::run_experiment(cfg);
                std::printf("%s: outputs in %s\n", name.c_str(), cfg.out_dir.c_str());
                return 0;
            }
        }
        if (app.got_subcommand("classify"))
            return run_classify(classify_args, classify_run, classify_eta, classify_simulate);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
