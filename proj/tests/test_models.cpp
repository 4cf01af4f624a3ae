#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stabilitylab/models.hpp"
#include "stabilitylab/optim.hpp"
#include "stabilitylab/rng.hpp"

using namespace stabilitylab;

namespace {

ReluNetParams relu_from(std::vector<double> a, std::vector<double> w, int d) {
    ReluNetParams p;
    p.width = static_cast<int>(a.size());
    p.input_dim = d;
    p.a = std::move(a);
    p.w = std::move(w);
    return p;
}

DiagNetParams diag_from(std::vector<double> a, std::vector<double> b, int depth = 2) {
    DiagNetParams p;
    p.a = std::move(a);
    p.b = std::move(b);
    p.depth = depth;
    return p;
}

} // namespace

TEST_CASE("relu forward") {
    auto p = relu_from({1.0}, {1.0, 0.0}, 2);
    double x1[2] = {2.0, -3.0};
    CHECK(forward(p, std::span<const double>(x1, 2)) == 2.0);
    double x2[2] = {-2.0, 5.0};
    CHECK(forward(p, std::span<const double>(x2, 2)) == 0.0);

    double bad[3] = {0, 0, 0};
    CHECK_THROWS_AS(forward(p, std::span<const double>(bad, 3)), std::invalid_argument);
}

TEST_CASE("diag forward") {
    auto p = diag_from({1.0, 2.0}, {3.0, 0.0});
    double x[2] = {1.0, 1.0};
    CHECK(forward(p, std::span<const double>(x, 2)) == 3.0);
}

TEST_CASE("relu per-example gradient by hand") {
    auto p = relu_from({2.0}, {1.0, 0.0}, 2);
    double x[2] = {1.0, 0.0};
    auto g = per_example_gradient(p, std::span<const double>(x, 2));
    REQUIRE(g.size() == 3);
    CHECK(g[0] == 1.0);  // d/da = relu(w.x)
    CHECK(g[1] == 2.0);  // d/dw = a * x
    CHECK(g[2] == 0.0);
}

TEST_CASE("diag per-example gradient by hand") {
    auto p = diag_from({1.0, 2.0}, {3.0, 4.0});
    double x[2] = {1.0, 1.0};
    auto g = per_example_gradient(p, std::span<const double>(x, 2));
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 4.0);
    CHECK(g[2] == 1.0);
    CHECK(g[3] == 2.0);
}

TEST_CASE("gradients match central finite differences away from kinks") {
    RngStream stream(21, 0);

    SUBCASE("relu net") {
        const int m = 3, d = 4;
        auto p = init_relu(m, d, stream);
        for (int rep = 0; rep < 20; ++rep) {
            auto x = stream.gaussian(d);
            bool near_kink = false;
            for (int j = 0; j < m; ++j)
                if (std::abs(dot(p.w_row(j), x)) < 1e-4) near_kink = true;
            if (near_kink) continue;

            auto g = per_example_gradient(p, x);
            auto flat = flatten(p);
            auto fd = oracles::finite_difference_gradient(
                [&](const std::vector<double>& theta) {
                    ReluNetParams q;
                    q.width = m;
                    q.input_dim = d;
                    q.a.assign(theta.begin(), theta.begin() + m);
                    q.w.assign(theta.begin() + m, theta.end());
                    return forward(q, x);
                },
                flat);
            for (std::size_t k = 0; k < g.size(); ++k)
                CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-5));
        }
    }

    SUBCASE("diag nets of depth 2 and 3") {
        for (int depth : {2, 3}) {
            const int d = 5;
            auto p = init_diag(d, 1.0, 1.0, stream, depth);
            auto x = stream.gaussian(d);
            auto g = per_example_gradient(p, x);
            auto flat = flatten(p);
            auto fd = oracles::finite_difference_gradient(
                [&](const std::vector<double>& theta) {
                    DiagNetParams q;
                    q.depth = depth;
                    q.a.assign(theta.begin(), theta.begin() + d);
                    q.b.assign(theta.begin() + d, theta.end());
                    return forward(q, x);
                },
                flat);
            for (std::size_t k = 0; k < g.size(); ++k)
                CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-5));
        }
    }
}

TEST_CASE("positive homogeneity of the relu net in the inner weights") {
    RngStream stream(17, 2);
    auto p = init_relu(4, 3, stream);
    auto x = stream.gaussian(3);
    double base = forward(p, x);
    ReluNetParams scaled = p;
    for (auto& v : scaled.w) v *= 2.5;
    CHECK(forward(scaled, x) == doctest::Approx(2.5 * base).epsilon(1e-12));
}

TEST_CASE("path norm") {
    auto p = relu_from({2.0, -1.0}, {3.0, 4.0, 0.0, 1.0}, 2);
    CHECK(path_norm(p) == doctest::Approx(11.0));

    auto zero = relu_from({0.0, 0.0}, {3.0, 4.0, 0.0, 1.0}, 2);
    CHECK(path_norm(zero) == 0.0);
}

TEST_CASE("path norm at the wide random initialization grows with width") {
    RngStream stream(5, 6);
    const int m = 100, d = 100;
    auto p = init_relu(m, d, stream);
    double pn = path_norm(p);
    CHECK(pn > m / 3.0);
    CHECK(pn < 3.0 * m);
}

TEST_CASE("weighted l2 norm and the path-norm inequality") {
    auto p = relu_from({1.0}, {1.0, 0.0}, 2);
    CHECK(weighted_l2_norm(p, 4.0) == doctest::Approx(5.0));
    CHECK(weighted_l2_norm(p, 4.0) >= 2.0 * 2.0 * path_norm(p));
    CHECK_THROWS_AS(weighted_l2_norm(p, 0.0), std::invalid_argument);

    // equality when ||w||^2 == q a^2
    auto q = relu_from({1.0}, {2.0, 0.0}, 2);
    CHECK(weighted_l2_norm(q, 4.0) == doctest::Approx(8.0));
    CHECK(weighted_l2_norm(q, 4.0) ==
          doctest::Approx(2.0 * std::sqrt(4.0) * path_norm(q)).epsilon(1e-14));

    SUBCASE("inequality holds across random draws") {
        RngStream stream(33, 0);
        for (int rep = 0; rep < 1000; ++rep) {
            auto r = init_relu(3, 4, stream);
            double qf = std::exp(stream.next_uniform(-2.0, 4.0));
            CHECK(weighted_l2_norm(r, qf) >= 2.0 * std::sqrt(qf) * path_norm(r) - 1e-12);
        }
    }
}

TEST_CASE("alpha, beta and their inequalities") {
    auto p = diag_from({1.0, 2.0}, {2.0, 1.0});
    auto alpha = alpha_vector(p);
    auto beta = effective_coefficients(p);
    CHECK(alpha[0] == 5.0);
    CHECK(alpha[1] == 5.0);
    CHECK(beta[0] == 2.0);
    CHECK(beta[1] == 2.0);

    auto deep = diag_from({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, 3);
    auto beta3 = effective_coefficients(deep);
    for (double b : beta3) CHECK(b == 1.0);
    CHECK_THROWS_AS(alpha_vector(deep), std::domain_error);

    SUBCASE("norm inequalities over random draws") {
        RngStream stream(44, 1);
        for (int rep = 0; rep < 1000; ++rep) {
            auto r = init_diag(6, 1.0, 2.0, stream);
            auto al = alpha_vector(r);
            auto be = effective_coefficients(r);
            double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
            for (std::size_t j = 0; j < al.size(); ++j) {
                a1 += al[j];
                a2 += al[j] * al[j];
                b1 += std::abs(be[j]);
                b2 += be[j] * be[j];
            }
            CHECK(a1 >= 2.0 * b1 - 1e-12);
            CHECK(a2 >= 4.0 * b2 - 1e-12);
        }
    }

    SUBCASE("equality iff layers balance elementwise") {
        auto balanced = diag_from({1.5, -0.5}, {-1.5, 0.5});
        auto al = alpha_vector(balanced);
        auto be = effective_coefficients(balanced);
        CHECK(al[0] == doctest::Approx(2.0 * std::abs(be[0])));
        CHECK(al[1] == doctest::Approx(2.0 * std::abs(be[1])));
    }
}

TEST_CASE("balancedness") {
    auto even = diag_from({1.0, 1.0}, {1.0, 1.0});
    CHECK(balancedness(even) == doctest::Approx(1.0));

    auto skew = diag_from({2.0, 0.0}, {0.5, 0.0});
    CHECK(balancedness(skew) == doctest::Approx((4.0 + 0.25) / 2.0));

    auto zero = diag_from({1.0, 0.0}, {0.0, 1.0});
    CHECK_THROWS_AS(balancedness(zero), std::domain_error);

    SUBCASE("r >= 1 over random draws") {
        RngStream stream(55, 2);
        for (int rep = 0; rep < 1000; ++rep) {
            auto r = init_diag(8, 0.5, 3.0, stream);
            CHECK(balancedness(r) >= 1.0 - 1e-12);
        }
    }
}

TEST_CASE("flatten and axpy agree on layout") {
    RngStream stream(66, 3);
    auto p = init_relu(3, 2, stream);
    auto flat = flatten(p);
    std::vector<double> bump(flat.size());
    for (auto& v : bump) v = stream.next_gaussian();
    axpy_params(p, 0.5, bump);
    auto flat2 = flatten(p);
    for (std::size_t k = 0; k < flat.size(); ++k)
        CHECK(flat2[k] == doctest::Approx(flat[k] + 0.5 * bump[k]).epsilon(1e-15));
}
