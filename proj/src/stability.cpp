#include "stabilitylab/stability.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stabilitylab {

namespace {

CheckResult make_check(double bound, double value, double risk, double loss_tol) {
    CheckResult r;
    r.margin = bound - value;
    r.ok = value <= bound;
    r.high_loss_warning = risk > loss_tol;
    return r;
}

} // namespace

CheckResult check_linear_stability_trace(const SharpnessReport& report, double eta,
                                         double loss_tol) {
    if (!(eta > 0.0)) throw std::invalid_argument("check_linear_stability_trace: eta must be positive");
    return make_check(2.0 / eta, report.trace, report.risk, loss_tol);
}

CheckResult check_gd_stability(const SharpnessReport& report, double eta, double loss_tol) {
    if (!(eta > 0.0)) throw std::invalid_argument("check_gd_stability: eta must be positive");
    return make_check(2.0 / eta, report.spectral, report.risk, loss_tol);
}

CheckResult check_loss_stability(const SharpnessReport& report, double eta, double mu0,
                                 double loss_tol) {
    if (!(eta > 0.0)) throw std::invalid_argument("check_loss_stability: eta must be positive");
    if (!(mu0 > 0.0)) throw std::invalid_argument("check_loss_stability: mu0 must be positive");
    return make_check(std::sqrt(1.0 / mu0) / eta, report.frobenius, report.risk, loss_tol);
}

SecondMomentState make_isotropic_state(const GramMatrix& gm, double scale, std::size_t p) {
    const int n = gm.sample_count();
    auto eig = sym_eigen(gm.k, /*with_vectors=*/true);
    const double lmax = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
    const double cutoff = lmax * 1e-12;

    // C = scale^2 (nK)^+ reproduces the span part of scale^2 I_p.
    SecondMomentState state;
    state.c = SymMatrix(n);
    int rank = 0;
    const double s2 = scale * scale;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double v = 0.0;
            for (int k = 0; k < n; ++k) {
                if (eig.values[k] <= cutoff) continue;
                v += eig.vectors[static_cast<std::size_t>(i) * n + k] *
                     eig.vectors[static_cast<std::size_t>(j) * n + k] /
                     (static_cast<double>(n) * eig.values[k]);
            }
            state.c.set(i, j, s2 * v);
        }
    }
    for (int k = 0; k < n; ++k)
        if (eig.values[k] > cutoff) ++rank;
    if (static_cast<std::size_t>(rank) > p)
        throw std::invalid_argument("make_isotropic_state: rank exceeds parameter count");
    const double orth_dim = static_cast<double>(p - rank);
    state.orth_mass = s2 * std::sqrt(orth_dim);
    state.orth_trace = s2 * orth_dim;
    return state;
}

SecondMomentState second_moment_step(const SecondMomentState& state, const GramMatrix& gm,
                                     double eta) {
    const int n = gm.sample_count();
    if (state.c.dim() != n)
        throw std::invalid_argument("second_moment_step: state/gram size mismatch");
    const auto& k = gm.k.data();
    const auto& c = state.c.data();

    std::vector<double> ck(static_cast<std::size_t>(n) * n);
    matmul_square(n, c, k, ck);
    std::vector<double> kck(static_cast<std::size_t>(n) * n);
    matmul_square(n, k, ck, kck);

    SecondMomentState next;
    next.c = SymMatrix(n);
    next.orth_mass = state.orth_mass;
    next.orth_trace = state.orth_trace;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            // CK + KC = CK + (CK)^T for symmetric C, K.
            double v = c[static_cast<std::size_t>(i) * n + j] -
                       eta * (ck[static_cast<std::size_t>(i) * n + j] +
                              ck[static_cast<std::size_t>(j) * n + i]);
            if (i == j) v += eta * eta * n * kck[static_cast<std::size_t>(i) * n + i];
            next.c.set(i, j, v);
        }
    }
    return next;
}

double second_moment_frobenius(const SecondMomentState& state, const GramMatrix& gm) {
    const int n = gm.sample_count();
    std::vector<double> ck(static_cast<std::size_t>(n) * n);
    matmul_square(n, state.c.data(), gm.k.data(), ck);
    // ||Q_span||_F^2 = n^2 tr(CKCK) = n^2 sum_ij (CK)_ij (CK)_ji
    double tr = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            tr += ck[static_cast<std::size_t>(i) * n + j] * ck[static_cast<std::size_t>(j) * n + i];
    double span_sq = static_cast<double>(n) * n * tr;
    if (span_sq < 0.0) span_sq = 0.0;
    return std::sqrt(span_sq + state.orth_mass * state.orth_mass);
}

double second_moment_trace(const SecondMomentState& state, const GramMatrix& gm) {
    const int n = gm.sample_count();
    // tr(Q_span) = n tr(CK)
    double tr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* crow = state.c.data().data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) tr += crow[j] * gm.k(j, i);
    }
    return static_cast<double>(n) * tr + state.orth_trace;
}

std::string to_string(SimVerdict v) {
    switch (v) {
        case SimVerdict::Stable: return "stable";
        case SimVerdict::Unstable: return "unstable";
        case SimVerdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

namespace {

template <class Params>
LinearizedSim simulate_impl(const Params& params_star, const Dataset& ds, double eta, long steps,
                            int trajectories, double init_scale, RngStream& stream) {
    if (trajectories < 1) throw std::invalid_argument("simulate_linearized_sgd: M >= 1 required");
    if (steps < 1) throw std::invalid_argument("simulate_linearized_sgd: steps >= 1 required");
    const int n = ds.n;
    const std::size_t p = params_star.param_count();

    std::vector<double> phi(static_cast<std::size_t>(n) * p);
    for (int i = 0; i < n; ++i)
        grad_into(params_star, ds.row(i), {phi.data() + static_cast<std::size_t>(i) * p, p});

    auto theta = flatten(params_star);
    const double coord_scale = init_scale * std::max(norm2(theta), 1.0) / std::sqrt(static_cast<double>(p));

    std::vector<std::vector<double>> deltas(trajectories);
    std::vector<RngStream> traj_streams;
    traj_streams.reserve(trajectories);
    for (int m = 0; m < trajectories; ++m) {
        traj_streams.push_back(stream.derive(static_cast<std::uint64_t>(m) + 1));
        deltas[m] = traj_streams[m].gaussian(p);
        for (auto& v : deltas[m]) v *= coord_scale;
    }

    const int n_checkpoints = 8;
    LinearizedSim sim;
    auto record = [&](long t) {
        double mean_sq = 0.0;
        for (auto& d : deltas) mean_sq += dot(d, d);
        mean_sq /= trajectories;
        // || (1/M) sum delta delta^T ||_F^2 = (1/M^2) sum_ml (delta_m . delta_l)^2
        double fro_sq = 0.0;
        for (int m = 0; m < trajectories; ++m) {
            fro_sq += dot(deltas[m], deltas[m]) * dot(deltas[m], deltas[m]);
            for (int l = m + 1; l < trajectories; ++l) {
                double c = dot(deltas[m], deltas[l]);
                fro_sq += 2.0 * c * c;
            }
        }
        fro_sq /= static_cast<double>(trajectories) * trajectories;
        sim.checkpoints.push_back(t);
        sim.mean_sq_deviation.push_back(mean_sq);
        sim.second_moment_fro.push_back(std::sqrt(fro_sq));
    };

    record(0);
    const double overflow_limit = 1e150;
    bool overflowed = false;
    for (long t = 1; t <= steps && !overflowed; ++t) {
        for (int m = 0; m < trajectories; ++m) {
            auto& d = deltas[m];
            const std::uint64_t i = traj_streams[m].next_index(static_cast<std::uint64_t>(n));
            std::span<const double> gi{phi.data() + i * p, p};
            double c = dot(gi, d);
            if (!std::isfinite(c) || std::abs(c) > overflow_limit) {
                overflowed = true;
                sim.overflow_step = t;
                break;
            }
            double ec = eta * c;
            for (std::size_t j = 0; j < p; ++j) d[j] -= ec * gi[j];
        }
        if (!overflowed && (t % std::max(1L, steps / n_checkpoints) == 0 || t == steps)) record(t);
    }

    if (overflowed) {
        sim.verdict = SimVerdict::Unstable;
        sim.growth_rate = std::numeric_limits<double>::infinity();
        return sim;
    }
    const double fro0 = sim.second_moment_fro.front();
    const double froT = sim.second_moment_fro.back();
    const double ratio = fro0 > 0.0 ? froT / fro0 : 0.0;
    if (ratio <= 1.0)
        sim.verdict = SimVerdict::Stable;
    else if (ratio >= 10.0)
        sim.verdict = SimVerdict::Unstable;
    else
        sim.verdict = SimVerdict::Inconclusive;
    sim.growth_rate = (ratio > 0.0 && steps > 0) ? std::log(ratio) / static_cast<double>(steps) : 0.0;
    return sim;
}

StabilityVerdict classify_from_gram_impl(const GramMatrix& gm, std::map<std::string, double> norms,
                                         double eta, const ClassifyOptions& options) {
    SharpnessReport report;
    report.trace = fisher_trace(gm);
    report.frobenius = fisher_frobenius(gm);
    report.eigenvalues = fisher_eigenvalues(gm);
    report.spectral = report.eigenvalues.empty() ? 0.0 : std::max(report.eigenvalues.front(), 0.0);
    report.risk = noise_covariance_products(gm).risk;
    report.norms = std::move(norms);

    if (report.risk > options.loss_tol && !options.force)
        throw std::domain_error("classify_minimum: loss above tolerance (use force to override)");

    StabilityVerdict verdict;
    verdict.eta = eta;
    verdict.report = report;
    verdict.trace_check = check_linear_stability_trace(report, eta, options.loss_tol);
    verdict.spectral_check = check_gd_stability(report, eta, options.loss_tol);

    double mu0 = options.mu0;
    if (mu0 <= 0.0) {
        try {
            mu0 = alignment_factor(gm);
            verdict.mu0_measured = true;
        } catch (const std::domain_error&) {
            mu0 = 1.0;  // conventional fallback at exact minima
        }
    }
    verdict.mu0_used = mu0;
    verdict.loss_check = check_loss_stability(report, eta, mu0, options.loss_tol);

    RngStream probe_stream(options.seed, 0xCE27ULL);
    verdict.probes = options.n_probes;
    for (int t = 0; t < options.n_probes; ++t) {
        auto v = probe_stream.gaussian(static_cast<std::size_t>(gm.sample_count()));
        if (rank_one_stability_gap(gm, eta, v) < 0.0) ++verdict.negative_gaps;
    }
    return verdict;
}

template <class Params>
StabilityVerdict classify_impl(const Params& p, const Dataset& ds, double eta,
                               const ClassifyOptions& options) {
    GramMatrix gm = gram_matrix(p, ds);
    StabilityVerdict verdict = classify_from_gram_impl(gm, collect_norms(p), eta, options);
    if (options.simulate) {
        RngStream sim_stream(options.seed, 0x51e1ULL);
        auto sim = simulate_impl(p, ds, eta, options.sim_steps, options.sim_trajectories,
                                 options.sim_init_scale, sim_stream);
        verdict.simulated = true;
        verdict.sim_verdict = sim.verdict;
        verdict.sim_growth_rate = sim.growth_rate;
    }
    return verdict;
}

} // namespace

StabilityVerdict classify_from_gram(const GramMatrix& gm, std::map<std::string, double> norms,
                                    double eta, const ClassifyOptions& options) {
    return classify_from_gram_impl(gm, std::move(norms), eta, options);
}

LinearizedSim simulate_linearized_sgd(const ReluNetParams& params_star, const Dataset& ds,
                                      double eta, long steps, int trajectories, double init_scale,
                                      RngStream& stream) {
    return simulate_impl(params_star, ds, eta, steps, trajectories, init_scale, stream);
}

LinearizedSim simulate_linearized_sgd(const DiagNetParams& params_star, const Dataset& ds,
                                      double eta, long steps, int trajectories, double init_scale,
                                      RngStream& stream) {
    return simulate_impl(params_star, ds, eta, steps, trajectories, init_scale, stream);
}

StabilityVerdict classify_minimum(const ReluNetParams& p, const Dataset& ds, double eta,
                                  const ClassifyOptions& options) {
    return classify_impl(p, ds, eta, options);
}

StabilityVerdict classify_minimum(const DiagNetParams& p, const Dataset& ds, double eta,
                                  const ClassifyOptions& options) {
    return classify_impl(p, ds, eta, options);
}

} // namespace stabilitylab
