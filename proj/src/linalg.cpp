#include "stabilitylab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stabilitylab/rng.hpp"

namespace stabilitylab {

SymMatrix::SymMatrix(int dim) : dim_(dim) {
    if (dim <= 0) throw std::invalid_argument("SymMatrix: dim must be positive");
    a_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
}

SymMatrix SymMatrix::from_dense(int dim, std::span<const double> row_major) {
    if (dim <= 0) throw std::invalid_argument("SymMatrix: dim must be positive");
    if (row_major.size() != static_cast<std::size_t>(dim) * dim)
        throw std::invalid_argument("SymMatrix: entry count does not match dim");
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j <= i; ++j) {
            double v = 0.5 * (row_major[static_cast<std::size_t>(i) * dim + j] +
                              row_major[static_cast<std::size_t>(j) * dim + i]);
            if (!std::isfinite(v))
                throw std::invalid_argument("SymMatrix: non-finite entry");
            m.a_[static_cast<std::size_t>(i) * dim + j] = v;
            m.a_[static_cast<std::size_t>(j) * dim + i] = v;
        }
    }
    return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix m(static_cast<int>(diag.size()));
    for (int i = 0; i < m.dim_; ++i) {
        if (!std::isfinite(diag[i])) throw std::invalid_argument("SymMatrix: non-finite entry");
        m.a_[static_cast<std::size_t>(i) * m.dim_ + i] = diag[i];
    }
    return m;
}

SymMatrix SymMatrix::identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.a_[static_cast<std::size_t>(i) * dim + i] = 1.0;
    return m;
}

void SymMatrix::set(int i, int j, double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("SymMatrix::set: non-finite value");
    a_[static_cast<std::size_t>(i) * dim_ + j] = v;
    a_[static_cast<std::size_t>(j) * dim_ + i] = v;
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (int i = 0; i < dim_; ++i) t += a_[static_cast<std::size_t>(i) * dim_ + i];
    return t;
}

double SymMatrix::frobenius() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
}

namespace {

double offdiag_norm(const std::vector<double>& a, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double v = a[static_cast<std::size_t>(i) * n + j];
            s += 2.0 * v * v;
        }
    return std::sqrt(s);
}

} // namespace

SymEigen sym_eigen(const SymMatrix& m, bool with_vectors) {
    const int n = m.dim();
    std::vector<double> a(m.data().begin(), m.data().end());
    std::vector<double> v;
    if (with_vectors) {
        v.assign(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
    }

    const double fro = m.frobenius();
    const double stop = std::max(1e-300, 1e-15 * fro);
    const int max_sweeps = 64;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = offdiag_norm(a, n);
        if (off <= stop) break;
        // Rotation threshold shrinks with the remaining off-diagonal mass.
        double thresh = (sweep < 3) ? 0.2 * off / (n * n) : 0.0;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a[static_cast<std::size_t>(p) * n + q];
                if (std::abs(apq) <= thresh) continue;
                double app = a[static_cast<std::size_t>(p) * n + p];
                double aqq = a[static_cast<std::size_t>(q) * n + q];
                double diff = aqq - app;
                double t;
                if (std::abs(apq) < 1e-300 * std::abs(diff)) {
                    t = apq / diff;
                } else {
                    double theta = diff / (2.0 * apq);
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                double tau = s / (1.0 + c);

                a[static_cast<std::size_t>(p) * n + p] = app - t * apq;
                a[static_cast<std::size_t>(q) * n + q] = aqq + t * apq;
                a[static_cast<std::size_t>(p) * n + q] = 0.0;
                a[static_cast<std::size_t>(q) * n + p] = 0.0;
                for (int k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    double akp = a[static_cast<std::size_t>(k) * n + p];
                    double akq = a[static_cast<std::size_t>(k) * n + q];
                    double nkp = akp - s * (akq + tau * akp);
                    double nkq = akq + s * (akp - tau * akq);
                    a[static_cast<std::size_t>(k) * n + p] = nkp;
                    a[static_cast<std::size_t>(p) * n + k] = nkp;
                    a[static_cast<std::size_t>(k) * n + q] = nkq;
                    a[static_cast<std::size_t>(q) * n + k] = nkq;
                }
                if (with_vectors) {
                    for (int k = 0; k < n; ++k) {
                        double vkp = v[static_cast<std::size_t>(k) * n + p];
                        double vkq = v[static_cast<std::size_t>(k) * n + q];
                        v[static_cast<std::size_t>(k) * n + p] = vkp - s * (vkq + tau * vkp);
                        v[static_cast<std::size_t>(k) * n + q] = vkq + s * (vkp - tau * vkq);
                    }
                }
            }
        }
    }

    SymEigen out;
    out.dim = n;
    out.values.resize(n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a[static_cast<std::size_t>(i) * n + i];
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return diag[x] > diag[y]; });
    for (int k = 0; k < n; ++k) out.values[k] = diag[order[k]];
    if (with_vectors) {
        out.vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                out.vectors[static_cast<std::size_t>(i) * n + k] =
                    v[static_cast<std::size_t>(i) * n + order[k]];
    }
    return out;
}

std::vector<double> sym_eigenvalues(const SymMatrix& m) {
    return sym_eigen(m, /*with_vectors=*/false).values;
}

double power_iteration_top(const SymMatrix& m, double tol, long max_iter) {
    const int n = m.dim();
    // Deterministic start vector; fixed stream so the routine is pure.
    RngStream stream(0x5eedULL, 0xb0bULL);
    std::vector<double> v = stream.gaussian(static_cast<std::size_t>(n));
    double nv = norm2(v);
    for (auto& c : v) c /= nv;

    std::vector<double> w(n);
    double lambda = 0.0;
    for (long it = 0; it < max_iter; ++it) {
        matvec(m, v, w);
        double wnorm = norm2(w);
        if (wnorm == 0.0) return 0.0;
        double rayleigh = dot(v, w);
        for (int i = 0; i < n; ++i) v[i] = w[i] / wnorm;
        if (it > 0 && std::abs(rayleigh - lambda) <= tol * std::max(std::abs(rayleigh), 1e-300))
            return rayleigh;
        lambda = rayleigh;
    }
    throw ConvergenceError("power_iteration_top: no convergence", lambda, max_iter);
}

double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(std::span<const double> x) {
    return std::sqrt(dot(x, x));
}

void matvec(const SymMatrix& m, std::span<const double> x, std::span<double> out) {
    const int n = m.dim();
    std::span<const double> a = m.data();
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        const double* row = a.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) s += row[j] * x[j];
        out[i] = s;
    }
}

void matmul_square(int n, std::span<const double> a, std::span<const double> b, std::span<double> c) {
    std::fill(c.begin(), c.end(), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            double aik = a[static_cast<std::size_t>(i) * n + k];
            if (aik == 0.0) continue;
            const double* brow = b.data() + static_cast<std::size_t>(k) * n;
            double* crow = c.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

} // namespace stabilitylab
