#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabilitylab/optim.hpp"
#include "stabilitylab/stability.hpp"

namespace stabilitylab {

struct ModelConfig {
    std::string family = "relu";  // "relu" | "diag"
    int width = 100;              // relu m
    int depth = 2;                // diag depth
};

struct TeacherConfig {
    std::string variant = "relu-sum";     // "relu-sum" | "linear"
    int k = 10;                           // relu-sum ridge count
    std::vector<double> beta_star;        // linear coefficients; empty = (1,1,1,0,...,0)
};

struct DataConfig {
    std::string distribution = "sphere";
    int n = 300;
    int d = 100;
    int n_test = kDefaultTestSetSize;
    TeacherConfig teacher;
};

/// Full description of one experiment; mirrors the JSON config files
/// field-for-field. Every output is a pure function of this struct.
struct ExperimentConfig {
    std::string experiment = "relu-process";
    std::vector<std::uint64_t> seeds{1};
    std::string out_dir;

    ModelConfig model;
    DataConfig data;
    OptConfig opt;

    std::vector<double> lr_grid;      // sweep grid (GD rates for the relu sweep)
    std::vector<double> sgd_lr_grid;  // diag sweep override; empty = pilot-derived
    std::vector<double> gd_lr_grid;   // diag sweep override; empty = pilot-derived
    bool fair_comparison = true;      // relu sweep: SGD runs at lr/sqrt(d)

    std::vector<double> balance_r0_grid{1, 2, 4, 8, 16};
    double balance_sgd_lr = 0.0;      // 0 = experiment default
    double balance_gd_lr = 0.0;
    double init_var_a = 1.0;          // diag init variances
    double init_var_b = 1.0;

    int verify_draws = 50;
    std::string verify_family = "both";  // "relu" | "diag" | "both"

    int workers = 0;  // 0 = hardware concurrency
};

ExperimentConfig default_config(const std::string& experiment);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TeacherConfig& c);
void from_json(const nlohmann::json& j, TeacherConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct ExperimentData {
    Dataset train;
    Dataset test;
    Teacher teacher;
};

/// Teacher, training set and test set regenerated deterministically from
/// (data config, seed); never shipped as files.
ExperimentData make_experiment_data(const DataConfig& cfg, std::uint64_t seed);

ReluNetParams make_relu_init(const ExperimentConfig& cfg, std::uint64_t seed);
DiagNetParams make_diag_init(const ExperimentConfig& cfg, std::uint64_t seed, double var_a,
                             double var_b);

struct SweepRow {
    std::string method;  // "sgd" | "gd"
    double lr = 0.0;
    std::uint64_t seed = 0;
    RunStatus status = RunStatus::MaxIters;
    bool converged = false;
    long iterations = 0;
    double final_loss = 0.0;
    double test_risk = 0.0;
    SharpnessReport report;
    StabilityVerdict verdict;
};

struct SweepResult {
    std::string family;
    std::vector<SweepRow> rows;  // one per (method, lr, seed); diverged runs flagged
};

/// Median across seeds of converged rows, one entry per (method, lr).
struct MedianRow {
    std::string method;
    double lr = 0.0;
    int converged_seeds = 0;
    double test_risk = 0.0;
    double trace = 0.0;
    double frobenius = 0.0;
    double spectral = 0.0;
};
std::vector<MedianRow> sweep_medians(const SweepResult& result);

/// Single Fig.-1 style SGD run with dense metric snapshots.
RunRecord run_relu_process(const ExperimentConfig& cfg);

/// LR sweep for the two-layer ReLU family: GD at each grid rate, SGD at
/// the fair-comparison rate lr/sqrt(d).
SweepResult run_relu_sweep(const ExperimentConfig& cfg);

/// LR sweep for the diagonal family. Grids default to 8 log-spaced rates
/// spanning the two decades below each method's divergence point, located
/// by doubling/bisection pilot runs.
SweepResult run_diag_sweep(const ExperimentConfig& cfg);

/// Pilot search for the largest converging learning rate.
double find_divergence_lr(const ExperimentConfig& cfg, OptMode mode, std::uint64_t seed);

struct BalanceRow {
    std::string method;
    double r0 = 0.0;
    std::uint64_t seed = 0;
    bool converged = false;
    double r_init = 0.0;
    double r_final = 0.0;
    double r_l2_init = 0.0;   // 0.5 ||alpha||_2 / ||beta||_1 variant
    double r_l2_final = 0.0;
    double test_risk = 0.0;
};

/// Balancing-effect experiment: SGD and GD from increasingly unbalanced
/// initializations a ~ N(0, 0.1), b ~ N(0, 0.1 r0).
std::vector<BalanceRow> run_diag_balance(const ExperimentConfig& cfg);

struct RatioStats {
    std::string pair;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

struct EquivalenceResult {
    std::string family;
    // per draw: {trace ratio, frobenius ratio, spectral ratio}
    std::vector<std::array<double, 3>> draws;
    std::vector<RatioStats> stats;
    bool regime_warning = false;
};

/// Sharpness/parameter-norm ratio statistics over random parameter draws.
/// relu: tr/||th||_{2,d}, ||G||_F/||th||_{2,sqrt d}, ||G||_2/||th||_{2,1}
/// diag: tr/||alpha||_1, ||G||_F/||alpha||_2, ||G||_2/||alpha||_inf
EquivalenceResult verify_norm_equivalence(const std::string& family, const ExperimentConfig& cfg);

/// Closed-form diagonal-family sharpness when the empirical covariance is
/// replaced by the exact identity: ||G||_2 = ||alpha||_inf, etc.
SharpnessReport diag_sharpness_identity_covariance(const DiagNetParams& p);

// Output writers (used by the runners when out_dir is set).
void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& cfg);
void write_balance_outputs(const std::vector<BalanceRow>& rows, const ExperimentConfig& cfg);
void write_equivalence_outputs(const std::vector<EquivalenceResult>& results,
                               const ExperimentConfig& cfg);
void write_process_outputs(const RunRecord& record, const ExperimentConfig& cfg);

void export_sweep_csv(const SweepResult& result, const std::filesystem::path& path);
void export_run_csv(const RunRecord& record, const std::string& family,
                    const std::filesystem::path& path);

/// Runs the experiment named in the config and writes its outputs.
void run_experiment(const ExperimentConfig& cfg);

} // namespace stabilitylab
