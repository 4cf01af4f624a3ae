#include "stabilitylab/models.hpp"

#include <cmath>
#include <stdexcept>

#include "stabilitylab/linalg.hpp"

namespace stabilitylab {

namespace {

void check_dim(std::size_t got, std::size_t want, const char* where) {
    if (got != want) throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}

// Signed integer power for the deep diagonal variant.
double ipow(double base, int exp) {
    double r = 1.0;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

} // namespace

double forward(const ReluNetParams& p, std::span<const double> x) {
    check_dim(x.size(), static_cast<std::size_t>(p.input_dim), "forward(relu)");
    double out = 0.0;
    for (int j = 0; j < p.width; ++j) {
        double z = dot(p.w_row(j), x);
        if (z > 0.0) out += p.a[j] * z;
    }
    return out;
}

double forward(const DiagNetParams& p, std::span<const double> x) {
    check_dim(x.size(), p.a.size(), "forward(diag)");
    const int d = p.input_dim();
    double out = 0.0;
    if (p.depth == 2) {
        for (int j = 0; j < d; ++j) out += p.a[j] * p.b[j] * x[j];
    } else {
        for (int j = 0; j < d; ++j) out += ipow(p.a[j], p.depth) * ipow(p.b[j], p.depth) * x[j];
    }
    return out;
}

void grad_into(const ReluNetParams& p, std::span<const double> x, std::span<double> g) {
    check_dim(x.size(), static_cast<std::size_t>(p.input_dim), "grad(relu)");
    check_dim(g.size(), p.param_count(), "grad(relu)");
    const int m = p.width, d = p.input_dim;
    for (int j = 0; j < m; ++j) {
        double z = dot(p.w_row(j), x);
        double* gw = g.data() + m + static_cast<std::size_t>(j) * d;
        if (z > 0.0) {
            g[j] = z;
            double aj = p.a[j];
            for (int k = 0; k < d; ++k) gw[k] = aj * x[k];
        } else {
            g[j] = 0.0;
            for (int k = 0; k < d; ++k) gw[k] = 0.0;
        }
    }
}

void grad_into(const DiagNetParams& p, std::span<const double> x, std::span<double> g) {
    check_dim(x.size(), p.a.size(), "grad(diag)");
    check_dim(g.size(), p.param_count(), "grad(diag)");
    const int d = p.input_dim();
    if (p.depth == 2) {
        for (int j = 0; j < d; ++j) {
            g[j] = p.b[j] * x[j];
            g[d + j] = p.a[j] * x[j];
        }
    } else {
        const int D = p.depth;
        for (int j = 0; j < d; ++j) {
            g[j] = D * ipow(p.a[j], D - 1) * ipow(p.b[j], D) * x[j];
            g[d + j] = D * ipow(p.a[j], D) * ipow(p.b[j], D - 1) * x[j];
        }
    }
}

GradVector per_example_gradient(const ReluNetParams& p, std::span<const double> x) {
    GradVector g(p.param_count());
    grad_into(p, x, g);
    return g;
}

GradVector per_example_gradient(const DiagNetParams& p, std::span<const double> x) {
    GradVector g(p.param_count());
    grad_into(p, x, g);
    return g;
}

void axpy_params(ReluNetParams& p, double coef, std::span<const double> g) {
    check_dim(g.size(), p.param_count(), "axpy(relu)");
    const int m = p.width;
    for (int j = 0; j < m; ++j) p.a[j] += coef * g[j];
    const std::size_t wn = p.w.size();
    for (std::size_t k = 0; k < wn; ++k) p.w[k] += coef * g[m + k];
}

void axpy_params(DiagNetParams& p, double coef, std::span<const double> g) {
    check_dim(g.size(), p.param_count(), "axpy(diag)");
    const std::size_t d = p.a.size();
    for (std::size_t j = 0; j < d; ++j) p.a[j] += coef * g[j];
    for (std::size_t j = 0; j < d; ++j) p.b[j] += coef * g[d + j];
}

std::vector<double> flatten(const ReluNetParams& p) {
    std::vector<double> out;
    out.reserve(p.param_count());
    out.insert(out.end(), p.a.begin(), p.a.end());
    out.insert(out.end(), p.w.begin(), p.w.end());
    return out;
}

std::vector<double> flatten(const DiagNetParams& p) {
    std::vector<double> out;
    out.reserve(p.param_count());
    out.insert(out.end(), p.a.begin(), p.a.end());
    out.insert(out.end(), p.b.begin(), p.b.end());
    return out;
}

double path_norm(const ReluNetParams& p) {
    double s = 0.0;
    for (int j = 0; j < p.width; ++j) s += std::abs(p.a[j]) * norm2(p.w_row(j));
    return s;
}

double weighted_l2_norm(const ReluNetParams& p, double q) {
    if (!(q > 0.0)) throw std::invalid_argument("weighted_l2_norm: q must be positive");
    double s = 0.0;
    for (int j = 0; j < p.width; ++j) {
        auto wj = p.w_row(j);
        s += dot(wj, wj) + q * p.a[j] * p.a[j];
    }
    return s;
}

std::vector<double> alpha_vector(const DiagNetParams& p) {
    if (p.depth != 2)
        throw std::domain_error("alpha_vector: defined for depth-2 networks only");
    const int d = p.input_dim();
    std::vector<double> alpha(d);
    for (int j = 0; j < d; ++j) alpha[j] = p.a[j] * p.a[j] + p.b[j] * p.b[j];
    return alpha;
}

std::vector<double> effective_coefficients(const DiagNetParams& p) {
    const int d = p.input_dim();
    std::vector<double> beta(d);
    if (p.depth == 2) {
        for (int j = 0; j < d; ++j) beta[j] = p.a[j] * p.b[j];
    } else {
        for (int j = 0; j < d; ++j) beta[j] = ipow(p.a[j], p.depth) * ipow(p.b[j], p.depth);
    }
    return beta;
}

double balancedness(const DiagNetParams& p) {
    auto alpha = alpha_vector(p);
    auto beta = effective_coefficients(p);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        num += alpha[j];
        den += std::abs(beta[j]);
    }
    if (den == 0.0) throw std::domain_error("balancedness: ||beta||_1 is zero");
    return num / (2.0 * den);
}

double balancedness_l2_variant(const DiagNetParams& p) {
    auto alpha = alpha_vector(p);
    auto beta = effective_coefficients(p);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        num += alpha[j] * alpha[j];
        den += std::abs(beta[j]);
    }
    if (den == 0.0) throw std::domain_error("balancedness_l2_variant: ||beta||_1 is zero");
    return 0.5 * std::sqrt(num) / den;
}

} // namespace stabilitylab
