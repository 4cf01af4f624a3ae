#pragma once

#include <span>
#include <vector>

namespace stabilitylab {

/// Flat per-example gradient of the model output, in the fixed parameter
/// order [a-block, then W rows] (ReLU net) or [a-block, b-block] (diagonal
/// net). The order is part of the serialization contract.
using GradVector = std::vector<double>;

/// Two-layer ReLU network f(x) = sum_j a_j * relu(w_j . x).
struct ReluNetParams {
    std::vector<double> a;  // m outer weights
    std::vector<double> w;  // m x d inner weights, row j = w_j
    int width = 0;          // m
    int input_dim = 0;      // d

    std::size_t param_count() const { return static_cast<std::size_t>(width) * (input_dim + 1); }
    std::span<const double> w_row(int j) const {
        return {w.data() + static_cast<std::size_t>(j) * input_dim, static_cast<std::size_t>(input_dim)};
    }
};

/// Diagonal linear network. depth == 2 is the standard model
/// f(x) = <a.b, x> with effective coefficients beta = a.b. Depths D >= 3
/// select the deep variant f(x) = <a^D . b^D, x>, whose coefficients are
/// beta_j = a_j^D b_j^D (nonnegative when D is even).
struct DiagNetParams {
    std::vector<double> a;
    std::vector<double> b;
    int depth = 2;

    int input_dim() const { return static_cast<int>(a.size()); }
    std::size_t param_count() const { return 2 * a.size(); }
};

double forward(const ReluNetParams& p, std::span<const double> x);
double forward(const DiagNetParams& p, std::span<const double> x);

/// Gradient of f(x; theta) with respect to theta, written into g
/// (length param_count). relu' at the kink is taken to be 0.
void grad_into(const ReluNetParams& p, std::span<const double> x, std::span<double> g);
void grad_into(const DiagNetParams& p, std::span<const double> x, std::span<double> g);

GradVector per_example_gradient(const ReluNetParams& p, std::span<const double> x);
GradVector per_example_gradient(const DiagNetParams& p, std::span<const double> x);

/// theta += coef * g, with g in the flat gradient order.
void axpy_params(ReluNetParams& p, double coef, std::span<const double> g);
void axpy_params(DiagNetParams& p, double coef, std::span<const double> g);

std::vector<double> flatten(const ReluNetParams& p);
std::vector<double> flatten(const DiagNetParams& p);

/// Path norm sum_j |a_j| * ||w_j||.
double path_norm(const ReluNetParams& p);

/// Weighted quadratic norm sum_j (||w_j||^2 + q a_j^2), q > 0. Satisfies
/// weighted_l2_norm(p, q) >= 2 sqrt(q) path_norm(p) with equality iff
/// ||w_j||^2 == q a_j^2 for every j.
double weighted_l2_norm(const ReluNetParams& p, double q);

/// alpha_j = a_j^2 + b_j^2; defined for depth 2 only.
std::vector<double> alpha_vector(const DiagNetParams& p);

/// Effective linear coefficients beta of the predictor.
std::vector<double> effective_coefficients(const DiagNetParams& p);

/// r(theta) = ||alpha||_1 / (2 ||beta||_1) >= 1; equals 1 iff |a_j| == |b_j|
/// wherever alpha_j > 0. Depth 2 only; throws when ||beta||_1 == 0.
double balancedness(const DiagNetParams& p);

/// Alternative unbalancedness measure 0.5 ||alpha||_2 / ||beta||_1,
/// reported alongside balancedness for comparison.
double balancedness_l2_variant(const DiagNetParams& p);

} // namespace stabilitylab
