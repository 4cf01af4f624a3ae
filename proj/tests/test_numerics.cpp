#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "stabilitylab/linalg.hpp"
#include "stabilitylab/rng.hpp"

using namespace stabilitylab;

TEST_CASE("identity and diagonal eigenvalues") {
    auto id = SymMatrix::identity(4);
    auto vals = sym_eigenvalues(id);
    for (double v : vals) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

    double d[3] = {3.0, 1.0, 2.0};
    auto vals2 = sym_eigenvalues(SymMatrix::diagonal(std::span<const double>(d, 3)));
    CHECK(vals2[0] == doctest::Approx(3.0));
    CHECK(vals2[1] == doctest::Approx(2.0));
    CHECK(vals2[2] == doctest::Approx(1.0));
}

TEST_CASE("random symmetric eigenvalues match characteristic-polynomial roots") {
    RngStream stream(42, 0);
    const int n = 5;
    std::vector<double> m(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = stream.next_gaussian();
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    auto sm = SymMatrix::from_dense(n, m);
    auto ours = sym_eigenvalues(sm);
    auto roots = oracles::char_poly_eigenvalues(m, n);
    REQUIRE(roots.size() == static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        CHECK(ours[i] == doctest::Approx(roots[i]).epsilon(1e-8));
}

TEST_CASE("eigendecomposition reconstructs the matrix") {
    RngStream stream(7, 1);
    const int n = 12;
    std::vector<double> m(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = stream.next_gaussian();
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    auto sm = SymMatrix::from_dense(n, m);
    auto eig = sym_eigen(sm, true);

    // ||M - V L V^T||_F <= 1e-10 ||M||_F
    double err = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double rec = 0.0;
            for (int k = 0; k < n; ++k)
                rec += eig.vectors[i * n + k] * eig.values[k] * eig.vectors[j * n + k];
            double diff = rec - sm(i, j);
            err += diff * diff;
        }
    CHECK(std::sqrt(err) <= 1e-10 * sm.frobenius());

    SUBCASE("eigenvalue sum equals trace") {
        double sum = 0.0;
        for (double v : eig.values) sum += v;
        CHECK(std::abs(sum - sm.trace()) <= 1e-9 * (1.0 + std::abs(sm.trace())));
    }
    SUBCASE("ordering is non-increasing") {
        for (int k = 1; k < n; ++k) CHECK(eig.values[k - 1] >= eig.values[k]);
    }
}

TEST_CASE("non-finite entries are rejected") {
    std::vector<double> m = {1.0, std::nan(""), std::nan(""), 2.0};
    CHECK_THROWS_AS(SymMatrix::from_dense(2, m), std::invalid_argument);
}

TEST_CASE("power iteration") {
    SUBCASE("zero matrix") {
        SymMatrix z(6);
        CHECK(power_iteration_top(z) == 0.0);
    }
    SUBCASE("diagonal") {
        double d[2] = {5.0, 1.0};
        CHECK(power_iteration_top(SymMatrix::diagonal(std::span<const double>(d, 2))) ==
              doctest::Approx(5.0).epsilon(1e-10));
    }
    SUBCASE("random PSD agrees with the full solver") {
        RngStream stream(3, 9);
        const int n = 8;
        // PSD via B B^T.
        std::vector<double> b(n * n), m(n * n, 0.0);
        for (auto& v : b) v = stream.next_gaussian();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int k = 0; k < n; ++k) s += b[i * n + k] * b[j * n + k];
                m[i * n + j] = s;
            }
        auto sm = SymMatrix::from_dense(n, m);
        double top = power_iteration_top(sm, 1e-12, 100000);
        CHECK(top == doctest::Approx(sym_eigenvalues(sm).front()).epsilon(1e-9));
    }
}

TEST_CASE("rng streams replay bitwise") {
    RngStream a(7, 2), b(7, 2);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    RngStream g1(7, 2), g2(7, 2);
    auto v1 = g1.gaussian(257), v2 = g2.gaussian(257);
    for (std::size_t i = 0; i < v1.size(); ++i) REQUIRE(v1[i] == v2[i]);
}

TEST_CASE("distinct stream ids decorrelate") {
    RngStream a(7, 1), b(7, 2);
    auto va = a.gaussian(20000), vb = b.gaussian(20000);
    double corr = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) corr += va[i] * vb[i];
    corr /= va.size();
    CHECK(std::abs(corr) < 0.03);
}

TEST_CASE("gaussian moments") {
    RngStream stream(11, 0);
    const int n = 1000000;
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = stream.next_gaussian();
        mean += z;
        sq += z * z;
    }
    mean /= n;
    sq /= n;
    CHECK(std::abs(mean) < 0.005);
    CHECK(sq == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("uniform range and moments") {
    RngStream stream(5, 4);
    auto v = stream.uniform(100000, -1.0, 1.0);
    double mean = 0.0, var = 0.0;
    for (double x : v) {
        CHECK(x >= -1.0);
        CHECK(x < 1.0);
        mean += x;
    }
    mean /= v.size();
    for (double x : v) var += (x - mean) * (x - mean);
    var /= v.size();
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("unit sphere vectors have norm one") {
    RngStream stream(13, 3);
    for (int rep = 0; rep < 50; ++rep) {
        auto v = stream.unit_sphere(3);
        CHECK(std::abs(norm2(v) - 1.0) <= 1e-15);
    }
}

TEST_CASE("domain errors on empty draws") {
    RngStream stream(1, 1);
    CHECK_THROWS_AS(stream.gaussian(0), std::invalid_argument);
    CHECK_THROWS_AS(stream.uniform(0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(stream.next_index(0), std::invalid_argument);
}

TEST_CASE("derived streams differ from parents") {
    RngStream parent(9, 0);
    auto child_a = parent.derive(1);
    auto child_b = parent.derive(2);
    std::set<std::uint64_t> firsts{parent.next_u64(), child_a.next_u64(), child_b.next_u64()};
    CHECK(firsts.size() == 3);

    // Deriving is a pure function of the parent's identity.
    auto child_a2 = RngStream(9, 0).derive(1);
    CHECK(child_a2.next_u64() == RngStream(9, 0).derive(1).next_u64());
}
