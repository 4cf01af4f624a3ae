#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stabilitylab/fisher.hpp"

namespace stabilitylab {

/// Outcome of a single stability predicate. These are necessary
/// conditions: ok == false rules linear stability out, ok == true does
/// not certify it. high_loss_warning flags that the report was taken at
/// a point whose risk exceeds the loss tolerance, where the Fisher
/// matrix may differ from the Hessian.
struct CheckResult {
    bool ok = false;
    double margin = 0.0;
    bool high_loss_warning = false;
};

inline constexpr double kDefaultLossTol = 1e-8;

/// tr(G) <= 2/eta (linear stability of SGD, boundary inclusive).
CheckResult check_linear_stability_trace(const SharpnessReport& report, double eta,
                                         double loss_tol = kDefaultLossTol);

/// ||G||_2 <= 2/eta (stability of GD, boundary inclusive).
CheckResult check_gd_stability(const SharpnessReport& report, double eta,
                               double loss_tol = kDefaultLossTol);

/// ||G||_F <= sqrt(1/mu0)/eta (loss stability at alignment mu0 > 0).
CheckResult check_loss_stability(const SharpnessReport& report, double eta, double mu0,
                                 double loss_tol = kDefaultLossTol);

/// Second moment Q_t of the linearized SGD deviations, represented on
/// the span of the per-example gradients: Q_t = sum_ab C_ab g_a g_b^T
/// plus a span-orthogonal component, which the dynamics leave untouched.
/// Valid for initial conditions without span/orthogonal cross terms
/// (e.g. isotropic Q_0).
struct SecondMomentState {
    SymMatrix c;             // n x n coefficients on the gradient span
    double orth_mass = 0.0;  // Frobenius norm of the orthogonal component
    double orth_trace = 0.0; // trace of the orthogonal component
};

/// State representing Q_0 = scale^2 * I_p for a model with p parameters.
SecondMomentState make_isotropic_state(const GramMatrix& gm, double scale, std::size_t p);

/// One step of Q <- Q - eta (QH + HQ) + eta^2 E[H_i Q H_i] in Gram
/// coordinates: C' = C - eta (CK + KC) + eta^2 n diag(diag(KCK)).
SecondMomentState second_moment_step(const SecondMomentState& state, const GramMatrix& gm,
                                     double eta);

double second_moment_frobenius(const SecondMomentState& state, const GramMatrix& gm);
double second_moment_trace(const SecondMomentState& state, const GramMatrix& gm);

enum class SimVerdict { Stable, Unstable, Inconclusive };
std::string to_string(SimVerdict v);

struct LinearizedSim {
    std::vector<long> checkpoints;
    std::vector<double> mean_sq_deviation;   // estimate of E ||delta_t||^2
    std::vector<double> second_moment_fro;   // || (1/M) sum delta delta^T ||_F
    SimVerdict verdict = SimVerdict::Inconclusive;
    double growth_rate = 0.0;                // per-step log growth of the Frobenius norm
    long overflow_step = -1;
};

inline constexpr long kDefaultSimSteps = 2000;
inline constexpr int kDefaultSimTrajectories = 64;
inline constexpr double kDefaultSimInitScale = 1e-3;

/// Monte-Carlo simulation of the linearized SGD
/// delta <- delta - eta (g_i . delta) g_i with i uniform, starting from
/// iid gaussian delta_0 whose overall size is init_scale * ||theta*||.
/// Stable if the terminal/initial second-moment Frobenius ratio is <= 1,
/// unstable if >= 10 (or on overflow), otherwise inconclusive.
LinearizedSim simulate_linearized_sgd(const ReluNetParams& params_star, const Dataset& ds,
                                      double eta, long steps, int trajectories,
                                      double init_scale, RngStream& stream);
LinearizedSim simulate_linearized_sgd(const DiagNetParams& params_star, const Dataset& ds,
                                      double eta, long steps, int trajectories,
                                      double init_scale, RngStream& stream);

struct ClassifyOptions {
    double loss_tol = kDefaultLossTol;
    bool force = false;          // classify even at high loss
    double mu0 = 0.0;            // 0: use measured mu if defined, else 1
    int n_probes = 200;          // random rank-one certificates
    bool simulate = false;
    long sim_steps = kDefaultSimSteps;
    int sim_trajectories = kDefaultSimTrajectories;
    double sim_init_scale = kDefaultSimInitScale;
    std::uint64_t seed = 0x51abULL;
};

struct StabilityVerdict {
    double eta = 0.0;
    CheckResult trace_check;
    CheckResult spectral_check;
    CheckResult loss_check;
    double mu0_used = 0.0;
    bool mu0_measured = false;
    int negative_gaps = 0;
    int probes = 0;
    bool simulated = false;
    SimVerdict sim_verdict = SimVerdict::Inconclusive;
    double sim_growth_rate = 0.0;
    SharpnessReport report;
};

StabilityVerdict classify_minimum(const ReluNetParams& p, const Dataset& ds, double eta,
                                  const ClassifyOptions& options = {});
StabilityVerdict classify_minimum(const DiagNetParams& p, const Dataset& ds, double eta,
                                  const ClassifyOptions& options = {});

/// Predicate checks and rank-one certificate search from a precomputed
/// Gram matrix (no simulation). options.simulate is ignored.
StabilityVerdict classify_from_gram(const GramMatrix& gm, std::map<std::string, double> norms,
                                    double eta, const ClassifyOptions& options = {});

} // namespace stabilitylab
