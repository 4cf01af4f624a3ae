#include "stabilitylab/fisher.hpp"

#include <cmath>
#include <future>
#include <stdexcept>
#include <thread>

namespace stabilitylab {

namespace {

int resolve_workers(int workers, int jobs) {
    if (workers <= 0) {
        unsigned hc = std::thread::hardware_concurrency();
        workers = hc ? static_cast<int>(hc) : 1;
    }
    return std::max(1, std::min(workers, jobs));
}

// Rows of Phi are the per-example gradients g_i (n x p).
template <class Params>
GramMatrix gram_matrix_impl(const Params& p, const Dataset& ds, int workers) {
    const int n = ds.n;
    const std::size_t pc = p.param_count();
    std::vector<double> phi(static_cast<std::size_t>(n) * pc);
    std::vector<double> e(n);
    for (int i = 0; i < n; ++i) {
        std::span<double> gi{phi.data() + static_cast<std::size_t>(i) * pc, pc};
        grad_into(p, ds.row(i), gi);
        for (double v : gi) {
            if (!std::isfinite(v))
                throw std::runtime_error("gram_matrix: non-finite gradient at sample " +
                                         std::to_string(i));
        }
        e[i] = forward(p, ds.row(i)) - ds.y[i];
    }

    SymMatrix k(n);
    const double inv_n = 1.0 / n;
    auto fill_rows = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            std::span<const double> gi{phi.data() + static_cast<std::size_t>(i) * pc, pc};
            for (int j = 0; j <= i; ++j) {
                std::span<const double> gj{phi.data() + static_cast<std::size_t>(j) * pc, pc};
                k.set(i, j, dot(gi, gj) * inv_n);
            }
        }
    };
    const int nw = resolve_workers(workers, n);
    if (nw <= 1 || n < 32) {
        fill_rows(0, n);
    } else {
        // Balance the triangular workload: chunk boundaries at sqrt spacing.
        std::vector<std::future<void>> tasks;
        std::vector<int> bounds(nw + 1, 0);
        for (int t = 1; t <= nw; ++t)
            bounds[t] = static_cast<int>(n * std::sqrt(static_cast<double>(t) / nw));
        bounds[nw] = n;
        for (int t = 0; t < nw; ++t) {
            if (bounds[t] < bounds[t + 1])
                tasks.push_back(std::async(std::launch::async, fill_rows, bounds[t], bounds[t + 1]));
        }
        for (auto& f : tasks) f.get();
    }
    return GramMatrix{std::move(k), std::move(e)};
}

} // namespace

GramMatrix gram_matrix(const ReluNetParams& p, const Dataset& ds, int workers) {
    return gram_matrix_impl(p, ds, workers);
}

GramMatrix gram_matrix(const DiagNetParams& p, const Dataset& ds, int workers) {
    return gram_matrix_impl(p, ds, workers);
}

double fisher_trace(const GramMatrix& gm) {
    return gm.k.trace();
}

double fisher_frobenius(const GramMatrix& gm) {
    // ||G||_F^2 = sum of squared eigenvalues of K = ||K||_F^2.
    return gm.k.frobenius();
}

double fisher_spectral(const GramMatrix& gm) {
    double top;
    try {
        top = power_iteration_top(gm.k);
    } catch (const ConvergenceError&) {
        top = sym_eigenvalues(gm.k).front();
    }
    return std::max(top, 0.0);
}

std::vector<double> fisher_eigenvalues(const GramMatrix& gm) {
    auto vals = sym_eigenvalues(gm.k);
    if (vals.empty()) return vals;
    const double floor = -1e-10 * std::max(vals.front(), 0.0);
    for (auto& v : vals)
        if (v < 0.0 && v >= floor) v = 0.0;
    return vals;
}

NoiseProducts noise_covariance_products(const GramMatrix& gm) {
    const int n = gm.sample_count();
    const auto& k = gm.k;
    const auto& e = gm.residuals;

    NoiseProducts out;
    for (int i = 0; i < n; ++i) out.risk += e[i] * e[i];
    out.risk /= 2.0 * n;

    // tr(G Sigma) = (1/n) sum_i e_i^2 (n sum_j K_ij^2) - (1/n) sum_l (sum_i e_i K_li)^2
    double first = 0.0;
    for (int i = 0; i < n; ++i) {
        double row_sq = 0.0;
        for (int j = 0; j < n; ++j) row_sq += k(i, j) * k(i, j);
        first += e[i] * e[i] * n * row_sq;
    }
    double second = 0.0;
    for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += e[i] * k(l, i);
        second += s * s;
    }
    out.tr_g_sigma = (first - second) / n;
    return out;
}

double alignment_factor(const GramMatrix& gm, double risk_floor) {
    auto np = noise_covariance_products(gm);
    if (np.risk <= risk_floor)
        throw std::domain_error("alignment_factor: risk at or below floor; S(theta) undefined");
    double fro = fisher_frobenius(gm);
    if (fro == 0.0) throw std::domain_error("alignment_factor: ||G||_F is zero");
    return (np.tr_g_sigma / (2.0 * np.risk)) / (fro * fro);
}

double rank_one_stability_gap(const GramMatrix& gm, double eta, std::span<const double> v) {
    const int n = gm.sample_count();
    if (v.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("rank_one_stability_gap: v must have n entries");
    for (double c : v)
        if (!std::isfinite(c)) throw std::invalid_argument("rank_one_stability_gap: non-finite v");

    // With u = sum_i v_i g_i:  u^T G u = n ||K v||^2, ||u||^2 = n v^T K v,
    // g_i . u = n (K v)_i.
    std::vector<double> kv(n);
    matvec(gm.k, v, kv);
    double kv_sq = dot(kv, kv);
    double vkv = dot(v, kv);
    double quartic = 0.0;
    for (int i = 0; i < n; ++i) quartic += kv[i] * kv[i] * kv[i] * kv[i];
    const double nn = static_cast<double>(n);
    return 2.0 * nn * nn * vkv * kv_sq - eta * nn * nn * nn * quartic;
}

std::map<std::string, double> collect_norms(const ReluNetParams& p) {
    const double d = static_cast<double>(p.input_dim);
    return {
        {"path_norm", path_norm(p)},
        {"w2q_1", weighted_l2_norm(p, 1.0)},
        {"w2q_sqrt_d", weighted_l2_norm(p, std::sqrt(d))},
        {"w2q_d", weighted_l2_norm(p, d)},
    };
}

std::map<std::string, double> collect_norms(const DiagNetParams& p) {
    std::map<std::string, double> norms;
    auto beta = effective_coefficients(p);
    double beta_l1 = 0.0;
    for (double b : beta) beta_l1 += std::abs(b);
    norms["beta_l1"] = beta_l1;
    if (p.depth == 2) {
        auto alpha = alpha_vector(p);
        double l1 = 0.0, l2 = 0.0, linf = 0.0;
        for (double a : alpha) {
            l1 += a;
            l2 += a * a;
            linf = std::max(linf, a);
        }
        norms["alpha_l1"] = l1;
        norms["alpha_l2"] = std::sqrt(l2);
        norms["alpha_linf"] = linf;
        if (beta_l1 > 0.0) {
            norms["balancedness"] = balancedness(p);
            norms["balancedness_l2"] = balancedness_l2_variant(p);
        }
    }
    return norms;
}

namespace {

template <class Params>
SharpnessReport report_from_gram(const Params& p, const Dataset& ds, long iteration,
                                 bool with_eigenvalues, int workers) {
    GramMatrix gm = gram_matrix(p, ds, workers);
    SharpnessReport r;
    r.iteration = iteration;
    r.trace = fisher_trace(gm);
    r.frobenius = fisher_frobenius(gm);
    r.risk = noise_covariance_products(gm).risk;
    if (with_eigenvalues) {
        r.eigenvalues = fisher_eigenvalues(gm);
        r.spectral = r.eigenvalues.empty() ? 0.0 : std::max(r.eigenvalues.front(), 0.0);
    } else {
        r.spectral = fisher_spectral(gm);
    }
    r.norms = collect_norms(p);
    return r;
}

// p x p route: G = (1/n) Phi^T Phi accumulated densely. Only sensible for
// small parameter counts.
template <class Params>
SharpnessReport report_via_fisher_impl(const Params& p, const Dataset& ds) {
    const int n = ds.n;
    const std::size_t pc = p.param_count();
    std::vector<double> g(pc);
    std::vector<double> fisher(pc * pc, 0.0);
    double risk = 0.0;
    for (int i = 0; i < n; ++i) {
        grad_into(p, ds.row(i), g);
        double e = forward(p, ds.row(i)) - ds.y[i];
        risk += e * e;
        for (std::size_t r = 0; r < pc; ++r) {
            if (g[r] == 0.0) continue;
            double gr = g[r];
            double* row = fisher.data() + r * pc;
            for (std::size_t c = r; c < pc; ++c) row[c] += gr * g[c];
        }
    }
    const double inv_n = 1.0 / n;
    for (std::size_t r = 0; r < pc; ++r)
        for (std::size_t c = r; c < pc; ++c) {
            double v = fisher[r * pc + c] * inv_n;
            fisher[r * pc + c] = v;
            fisher[c * pc + r] = v;
        }
    SymMatrix gmat = SymMatrix::from_dense(static_cast<int>(pc), fisher);

    SharpnessReport out;
    out.risk = risk / (2.0 * n);
    out.trace = gmat.trace();
    out.frobenius = gmat.frobenius();
    try {
        out.spectral = std::max(power_iteration_top(gmat), 0.0);
    } catch (const ConvergenceError&) {
        out.spectral = std::max(sym_eigenvalues(gmat).front(), 0.0);
    }
    out.norms = collect_norms(p);
    return out;
}

} // namespace

SharpnessReport sharpness_report(const ReluNetParams& p, const Dataset& ds, long iteration,
                                 bool with_eigenvalues, int workers) {
    return report_from_gram(p, ds, iteration, with_eigenvalues, workers);
}

SharpnessReport sharpness_report(const DiagNetParams& p, const Dataset& ds, long iteration,
                                 bool with_eigenvalues, int workers) {
    return report_from_gram(p, ds, iteration, with_eigenvalues, workers);
}

SharpnessReport sharpness_report_via_fisher(const ReluNetParams& p, const Dataset& ds) {
    return report_via_fisher_impl(p, ds);
}

SharpnessReport sharpness_report_via_fisher(const DiagNetParams& p, const Dataset& ds) {
    return report_via_fisher_impl(p, ds);
}

} // namespace stabilitylab
