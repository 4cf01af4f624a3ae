#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "stabilitylab/data.hpp"
#include "stabilitylab/linalg.hpp"
#include "stabilitylab/models.hpp"

namespace stabilitylab {

/// n x n Gram matrix K_ij = g_i . g_j / n of per-example gradients,
/// together with the residuals e_i = f(x_i) - y_i at the same point.
/// K shares its nonzero spectrum with the p x p empirical Fisher matrix
/// G = (1/n) sum_i g_i g_i^T, which is never formed for large p.
struct GramMatrix {
    SymMatrix k;
    std::vector<double> residuals;

    int sample_count() const { return k.dim(); }
};

GramMatrix gram_matrix(const ReluNetParams& p, const Dataset& ds, int workers = 0);
GramMatrix gram_matrix(const DiagNetParams& p, const Dataset& ds, int workers = 0);

double fisher_trace(const GramMatrix& gm);
double fisher_frobenius(const GramMatrix& gm);

/// Largest eigenvalue of K (power iteration, full solve as fallback),
/// clamped to be nonnegative.
double fisher_spectral(const GramMatrix& gm);

/// All eigenvalues of K descending; values in [-1e-10 * lambda_max, 0)
/// are clamped to zero.
std::vector<double> fisher_eigenvalues(const GramMatrix& gm);

struct NoiseProducts {
    double tr_g_sigma = 0.0;  // tr(G Sigma) for batch-1 sampling noise
    double risk = 0.0;        // empirical risk (1/2n) sum e_i^2
};

/// tr(G Sigma) where Sigma is the covariance of the batch-1 stochastic
/// gradient xi = e_I g_I - grad(L), I uniform on [n]. Computed entirely
/// in Gram coordinates.
NoiseProducts noise_covariance_products(const GramMatrix& gm);

inline constexpr double kDefaultRiskFloor = 1e-12;

/// Alignment factor mu = [tr(G Sigma) / (2 L)] / ||G||_F^2. Undefined at
/// (numerical) minima: throws std::domain_error when the risk is at or
/// below risk_floor, or when ||G||_F == 0.
double alignment_factor(const GramMatrix& gm, double risk_floor = kDefaultRiskFloor);

/// Quadratic form <A, T_eta A> of the linearized second-moment operator
/// at A = u u^T with u = sum_i v_i g_i:
///   gap = 2 (u^T G u) ||u||^2 - eta * (1/n) sum_i (g_i . u)^4.
/// A negative value certifies linear instability at learning rate eta.
double rank_one_stability_gap(const GramMatrix& gm, double eta, std::span<const double> v);

/// Sharpness and parameter-norm snapshot at one point. The metrics are
/// those of the empirical Fisher matrix G; at small risk G coincides with
/// the Hessian up to the residual term, which is not computed.
struct SharpnessReport {
    long iteration = 0;
    double trace = 0.0;
    double frobenius = 0.0;
    double spectral = 0.0;
    double risk = 0.0;
    std::vector<double> eigenvalues;        // empty unless requested
    std::map<std::string, double> norms;    // family-specific parameter norms
};

std::map<std::string, double> collect_norms(const ReluNetParams& p);
std::map<std::string, double> collect_norms(const DiagNetParams& p);

SharpnessReport sharpness_report(const ReluNetParams& p, const Dataset& ds, long iteration = 0,
                                 bool with_eigenvalues = false, int workers = 0);
SharpnessReport sharpness_report(const DiagNetParams& p, const Dataset& ds, long iteration = 0,
                                 bool with_eigenvalues = false, int workers = 0);

/// Same metrics computed through the p x p Fisher matrix instead of the
/// n x n Gram matrix; intended for p << n (used by the norm-equivalence
/// suites, where n is huge). Agrees with the Gram route by the shared
/// nonzero spectrum.
SharpnessReport sharpness_report_via_fisher(const ReluNetParams& p, const Dataset& ds);
SharpnessReport sharpness_report_via_fisher(const DiagNetParams& p, const Dataset& ds);

} // namespace stabilitylab
