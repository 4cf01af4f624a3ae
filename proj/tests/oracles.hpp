// Test-only brute-force oracles, kept independent of the library's
// Gram-coordinate computation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "stabilitylab/data.hpp"
#include "stabilitylab/models.hpp"

namespace oracles {

using stabilitylab::Dataset;

// Plain dense matrix helpers (row-major).
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  int n) {
    std::vector<double> c(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            double aik = a[static_cast<std::size_t>(i) * n + k];
            for (int j = 0; j < n; ++j)
                c[static_cast<std::size_t>(i) * n + j] += aik * b[static_cast<std::size_t>(k) * n + j];
        }
    return c;
}

inline double frobenius(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

inline double trace(const std::vector<double>& a, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[static_cast<std::size_t>(i) * n + i];
    return s;
}

// det(M) by cofactor expansion; fine for dim <= 6.
inline double det_cofactor(const std::vector<double>& m, int n) {
    if (n == 1) return m[0];
    double acc = 0.0;
    std::vector<double> minor(static_cast<std::size_t>(n - 1) * (n - 1));
    for (int c = 0; c < n; ++c) {
        for (int i = 1; i < n; ++i) {
            int mc = 0;
            for (int j = 0; j < n; ++j) {
                if (j == c) continue;
                minor[static_cast<std::size_t>(i - 1) * (n - 1) + mc] =
                    m[static_cast<std::size_t>(i) * n + j];
                ++mc;
            }
        }
        double cof = det_cofactor(minor, n - 1);
        acc += ((c % 2) ? -1.0 : 1.0) * m[c] * cof;
    }
    return acc;
}

// Eigenvalues of a small symmetric matrix as roots of the characteristic
// polynomial, found by scanning for sign changes of det(M - t I) and
// bisecting. Requires simple eigenvalues (random matrices).
inline std::vector<double> char_poly_eigenvalues(const std::vector<double>& m, int n) {
    auto p = [&](double t) {
        std::vector<double> shifted = m;
        for (int i = 0; i < n; ++i) shifted[static_cast<std::size_t>(i) * n + i] -= t;
        return det_cofactor(shifted, n);
    };
    // Gershgorin bounds.
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < n; ++i) {
        double r = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) r += std::abs(m[static_cast<std::size_t>(i) * n + j]);
        lo = std::min(lo, m[static_cast<std::size_t>(i) * n + i] - r);
        hi = std::max(hi, m[static_cast<std::size_t>(i) * n + i] + r);
    }
    lo -= 1.0;
    hi += 1.0;

    const int samples = 20000;
    std::vector<double> roots;
    double prev_t = lo, prev_v = p(lo);
    for (int s = 1; s <= samples; ++s) {
        double t = lo + (hi - lo) * s / samples;
        double v = p(t);
        if ((prev_v < 0.0 && v > 0.0) || (prev_v > 0.0 && v < 0.0)) {
            double a = prev_t, b = t, fa = prev_v;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (a + b);
                double fm = p(mid);
                if ((fa < 0.0) == (fm < 0.0)) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        prev_t = t;
        prev_v = v;
    }
    std::sort(roots.begin(), roots.end(), std::greater<>());
    return roots;
}

// Central finite differences of a scalar function of a flat parameter
// vector.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> theta,
    double step = 1e-6) {
    std::vector<double> g(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        double orig = theta[k];
        theta[k] = orig + step;
        double fp = f(theta);
        theta[k] = orig - step;
        double fm = f(theta);
        theta[k] = orig;
        g[k] = (fp - fm) / (2.0 * step);
    }
    return g;
}

// Per-example gradients as dense rows (n x p).
template <class Params>
std::vector<std::vector<double>> gradient_rows(const Params& params, const Dataset& ds) {
    std::vector<std::vector<double>> rows(ds.n);
    for (int i = 0; i < ds.n; ++i) rows[i] = stabilitylab::per_example_gradient(params, ds.row(i));
    return rows;
}

// Dense p x p Fisher matrix G = (1/n) sum g_i g_i^T.
inline std::vector<double> dense_fisher(const std::vector<std::vector<double>>& rows) {
    const int n = static_cast<int>(rows.size());
    const std::size_t p = rows[0].size();
    std::vector<double> g(p * p, 0.0);
    for (const auto& gi : rows)
        for (std::size_t r = 0; r < p; ++r)
            for (std::size_t c = 0; c < p; ++c) g[r * p + c] += gi[r] * gi[c];
    for (auto& v : g) v /= n;
    return g;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// tr(G Sigma) from dense assembly of Sigma = (1/n) sum e_i^2 g_i g_i^T - grad grad^T.
inline double dense_tr_g_sigma(const std::vector<std::vector<double>>& rows,
                               const std::vector<double>& residuals) {
    const int n = static_cast<int>(rows.size());
    const std::size_t p = rows[0].size();
    std::vector<double> grad(p, 0.0);
    for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < p; ++k) grad[k] += residuals[i] * rows[i][k] / n;
    auto g = dense_fisher(rows);
    std::vector<double> sigma(p * p, 0.0);
    for (int i = 0; i < n; ++i)
        for (std::size_t r = 0; r < p; ++r)
            for (std::size_t c = 0; c < p; ++c)
                sigma[r * p + c] += residuals[i] * residuals[i] * rows[i][r] * rows[i][c] / n;
    for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) sigma[r * p + c] -= grad[r] * grad[c];
    double tr = 0.0;
    for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) tr += g[r * p + c] * sigma[c * p + r];
    return tr;
}

// <A, T_eta A> at A = u u^T with u = sum_i v_i g_i, evaluated densely.
inline double dense_rank_one_gap(const std::vector<std::vector<double>>& rows,
                                 const std::vector<double>& v, double eta) {
    const int n = static_cast<int>(rows.size());
    const std::size_t p = rows[0].size();
    std::vector<double> u(p, 0.0);
    for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < p; ++k) u[k] += v[i] * rows[i][k];
    double u_norm_sq = dot(u, u);
    double utgu = 0.0;
    for (int i = 0; i < n; ++i) {
        double giu = dot(rows[i], u);
        utgu += giu * giu / n;
    }
    double quartic = 0.0;
    for (int i = 0; i < n; ++i) {
        double giu = dot(rows[i], u);
        quartic += giu * giu * giu * giu / n;
    }
    return 2.0 * utgu * u_norm_sq - eta * quartic;
}

// One step of the dense second-moment recursion
// Q' = Q - eta (QG + GQ) + eta^2 (1/n) sum_i (g_i^T Q g_i) g_i g_i^T.
inline std::vector<double> dense_second_moment_step(const std::vector<double>& q,
                                                    const std::vector<std::vector<double>>& rows,
                                                    double eta) {
    const int n = static_cast<int>(rows.size());
    const int p = static_cast<int>(rows[0].size());
    auto g = dense_fisher(rows);
    std::vector<double> next(q.size());
    auto qg = matmul(q, g, p);
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c)
            next[static_cast<std::size_t>(r) * p + c] =
                q[static_cast<std::size_t>(r) * p + c] -
                eta * (qg[static_cast<std::size_t>(r) * p + c] + qg[static_cast<std::size_t>(c) * p + r]);
    for (int i = 0; i < n; ++i) {
        const auto& gi = rows[i];
        double quad = 0.0;
        for (int r = 0; r < p; ++r) {
            double s = 0.0;
            for (int c = 0; c < p; ++c) s += q[static_cast<std::size_t>(r) * p + c] * gi[c];
            quad += gi[r] * s;
        }
        const double w = eta * eta * quad / n;
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c) next[static_cast<std::size_t>(r) * p + c] += w * gi[r] * gi[c];
    }
    return next;
}

// Spearman rank correlation (average ranks for ties).
inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    auto ranks = [&](const std::vector<double>& v) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            double avg = 0.5 * (i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    auto rx = ranks(x), ry = ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace oracles
