#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stabilitylab/data.hpp"
#include "stabilitylab/fisher.hpp"
#include "stabilitylab/models.hpp"

namespace stabilitylab {

enum class OptMode { Sgd, Gd };
std::string to_string(OptMode m);
OptMode opt_mode_from_string(const std::string& s);

struct OptConfig {
    double learning_rate = 0.1;
    OptMode mode = OptMode::Sgd;
    double clip_threshold = 0.0;     // <= 0 disables clipping
    long max_iters = 100000;
    double loss_tol = 1e-8;
    long metric_period = 0;          // sharpness snapshots every k iters; 0 = final only
    long loss_record_period = 0;     // 0 = metric_period if set, else per-step (GD) / auto (SGD)
    bool final_eigenvalues = false;  // full spectrum in the final snapshot
    std::uint64_t seed = 0;          // identifies the sampling stream in records
};

/// Rescales g to norm delta when ||g|| > delta; no-op otherwise (including
/// ||g|| == 0). Returns whether clipping fired. Direction is preserved.
bool clip_gradient(std::span<double> g, double delta);

double empirical_risk(const ReluNetParams& p, const Dataset& ds);
double empirical_risk(const DiagNetParams& p, const Dataset& ds);

/// Same half-mean-squared formula on a held-out set (Monte-Carlo estimate
/// of the population risk).
double test_risk(const ReluNetParams& p, const Dataset& test_set);
double test_risk(const DiagNetParams& p, const Dataset& test_set);

struct LossPoint {
    long iteration = 0;
    double loss = 0.0;
};

/// Family-erased parameter state for serialization: flat 64-bit floats in
/// the documented order plus a shape header.
struct ParamsBlob {
    std::string family;  // "relu" | "diag"
    int width = 0;       // relu m
    int input_dim = 0;   // d
    int depth = 2;       // diag depth
    std::vector<double> flat;
};

ParamsBlob to_blob(const ReluNetParams& p);
ParamsBlob to_blob(const DiagNetParams& p);
ReluNetParams relu_from_blob(const ParamsBlob& blob);
DiagNetParams diag_from_blob(const ParamsBlob& blob);

enum class RunStatus { Converged, MaxIters, Diverged };
std::string to_string(RunStatus s);
RunStatus run_status_from_string(const std::string& s);

struct RunRecord {
    OptConfig config;
    std::vector<LossPoint> loss_curve;
    std::vector<std::uint8_t> clip_fired;  // one entry per iteration taken
    std::vector<SharpnessReport> snapshots;
    ParamsBlob final_params;
    RunStatus status = RunStatus::MaxIters;
    bool converged = false;
    long iterations = 0;
    double final_loss = 0.0;
    double test_risk = std::numeric_limits<double>::quiet_NaN();
};

/// Runs SGD (batch 1, uniform with replacement) or full-batch GD from the
/// given parameters until the loss tolerance, divergence, or the budget.
/// SGD convergence uses a trailing window (length n) of per-step sample
/// losses, confirmed against the full empirical risk. Deterministic given
/// (params, dataset, config, stream).
RunRecord train(ReluNetParams params, const Dataset& ds, const OptConfig& config, RngStream& stream);
RunRecord train(DiagNetParams params, const Dataset& ds, const OptConfig& config, RngStream& stream);

/// a_j ~ N(0,1), W entries ~ N(0, 1/sqrt(d)) (variances).
ReluNetParams init_relu(int m, int d, RngStream& stream);

/// a_j ~ N(0, var_a), b_j ~ N(0, var_b).
DiagNetParams init_diag(int d, double var_a, double var_b, RngStream& stream, int depth = 2);

} // namespace stabilitylab
