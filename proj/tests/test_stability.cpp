#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "stabilitylab/optim.hpp"
#include "stabilitylab/stability.hpp"

using namespace stabilitylab;

namespace {

Dataset raw_dataset(int n, int d, std::vector<double> x, std::vector<double> y) {
    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.x = std::move(x);
    ds.y = std::move(y);
    ds.meta = {"custom", "custom", 0};
    return ds;
}

SharpnessReport report_with(double trace, double fro, double spec, double risk = 0.0) {
    SharpnessReport r;
    r.trace = trace;
    r.frobenius = fro;
    r.spectral = spec;
    r.risk = risk;
    return r;
}

// Small interpolating instance: diag net fit to its own labels.
struct TinyInstance {
    DiagNetParams params;
    Dataset data;
};

TinyInstance interpolating_diag(std::uint64_t seed, int d = 4, int n = 3) {
    RngStream stream(seed, 0);
    DiagNetParams p;
    p.a = stream.gaussian(d);
    p.b = stream.gaussian(d);
    auto inputs = sample_cube_inputs(n, d, stream);
    std::vector<double> labels(n);
    Dataset ds = raw_dataset(n, d, inputs, labels);
    for (int i = 0; i < n; ++i) ds.y[i] = forward(p, ds.row(i));
    return {std::move(p), std::move(ds)};
}

} // namespace

TEST_CASE("trace stability check") {
    auto r = report_with(1.9, 1.0, 0.5);
    auto c = check_linear_stability_trace(r, 1.0);
    CHECK(c.ok);
    CHECK(c.margin == doctest::Approx(0.1));
    CHECK_FALSE(c.high_loss_warning);

    auto r2 = report_with(2.1, 1.0, 0.5);
    auto c2 = check_linear_stability_trace(r2, 1.0);
    CHECK_FALSE(c2.ok);
    CHECK(c2.margin == doctest::Approx(-0.1));

    auto r3 = report_with(1.0, 1.0, 0.5, /*risk=*/1e-3);
    CHECK(check_linear_stability_trace(r3, 1.0).high_loss_warning);
}

TEST_CASE("gd spectral check is boundary-inclusive") {
    auto r = report_with(5.0, 3.0, 2.0);
    CHECK(check_gd_stability(r, 1.0).ok);
    auto zero = report_with(0.0, 0.0, 0.0);
    auto c = check_gd_stability(zero, 1.0);
    CHECK(c.ok);
    CHECK(c.margin == doctest::Approx(2.0));
}

TEST_CASE("loss stability threshold scales with mu0") {
    auto r = report_with(2.0, 0.5, 0.3);
    CHECK(check_loss_stability(r, 1.0, 1.0).ok);
    // mu0 = 4 halves the frobenius threshold
    auto t1 = check_loss_stability(report_with(0, 0, 0), 1.0, 1.0).margin;
    auto t4 = check_loss_stability(report_with(0, 0, 0), 1.0, 4.0).margin;
    CHECK(t1 == doctest::Approx(2.0 * t4));
    CHECK_THROWS_AS(check_loss_stability(r, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("second-moment step fixed point at zero") {
    auto inst = interpolating_diag(5);
    auto gm = gram_matrix(inst.params, inst.data);
    SecondMomentState state;
    state.c = SymMatrix(inst.data.n);
    state.orth_mass = 0.0;
    state.orth_trace = 0.0;
    auto next = second_moment_step(state, gm, 0.3);
    for (int i = 0; i < inst.data.n; ++i)
        for (int j = 0; j < inst.data.n; ++j) CHECK(next.c(i, j) == 0.0);
}

TEST_CASE("single-sample second moment follows the scalar recursion") {
    auto inst = interpolating_diag(6, 3, 1);
    auto gm = gram_matrix(inst.params, inst.data);
    const double k = gm.k(0, 0);
    const double eta = 0.4 / k;

    SecondMomentState state;
    state.c = SymMatrix(1);
    state.c.set(0, 0, 2.5);
    state.orth_mass = 0.0;
    state.orth_trace = 0.0;

    double c = 2.5;
    for (int t = 0; t < 10; ++t) {
        state = second_moment_step(state, gm, eta);
        c = c * (1.0 - 2.0 * eta * k + eta * eta * k * k);
        CHECK(state.c(0, 0) == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("gram-coordinate recursion reproduces the dense second-moment evolution") {
    auto inst = interpolating_diag(7, 4, 3);  // p = 8, n = 3
    auto gm = gram_matrix(inst.params, inst.data);
    auto rows = oracles::gradient_rows(inst.params, inst.data);
    const std::size_t p = rows[0].size();

    const double scale = 0.01;
    auto state = make_isotropic_state(gm, scale, p);

    // dense Q0 = scale^2 I
    std::vector<double> q(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) q[i * p + i] = scale * scale;

    const double eta = 0.05;
    for (int t = 0; t < 50; ++t) {
        state = second_moment_step(state, gm, eta);
        q = oracles::dense_second_moment_step(q, rows, eta);
        double ours = second_moment_frobenius(state, gm);
        double want = oracles::frobenius(q);
        CHECK(ours == doctest::Approx(want).epsilon(1e-8));

        double tr_ours = second_moment_trace(state, gm);
        double tr_want = oracles::trace(q, static_cast<int>(p));
        CHECK(tr_ours == doctest::Approx(tr_want).epsilon(1e-8));
    }
}

TEST_CASE("recursion is first-order flat as eta -> 0") {
    auto inst = interpolating_diag(8, 4, 3);
    auto gm = gram_matrix(inst.params, inst.data);
    auto state0 = make_isotropic_state(gm, 1.0, inst.params.param_count());
    double norm0 = second_moment_frobenius(state0, gm);
    double kmax = fisher_eigenvalues(gm).front();

    for (double eta : {1e-4, 1e-5, 1e-6}) {
        auto state1 = second_moment_step(state0, gm, eta);
        double diff = std::abs(second_moment_frobenius(state1, gm) - norm0);
        CHECK(diff <= 2.0 * eta * norm0 * kmax + 20.0 * eta * eta * norm0 * kmax * kmax);
    }
}

TEST_CASE("linearized simulation") {
    auto inst = interpolating_diag(9, 4, 3);

    SUBCASE("eta = 0 freezes the deviations") {
        RngStream stream(9, 50);
        auto sim = simulate_linearized_sgd(inst.params, inst.data, 0.0, 50, 8, 1e-3, stream);
        CHECK(sim.verdict == SimVerdict::Stable);
        CHECK(sim.mean_sq_deviation.front() ==
              doctest::Approx(sim.mean_sq_deviation.back()).epsilon(1e-15));
    }

    SUBCASE("single-sample stability matches the scalar criterion") {
        auto single = interpolating_diag(10, 3, 1);
        auto gm = gram_matrix(single.params, single.data);
        const double k = gm.k(0, 0);
        // contraction factor per step: 1 - 2 eta k + eta^2 k^2
        double eta_stable = 0.5 / k;
        double eta_unstable = 2.5 / k;
        RngStream s1(10, 51), s2(10, 52);
        auto sim_stable = simulate_linearized_sgd(single.params, single.data, eta_stable, 200, 16, 1e-3, s1);
        auto sim_unstable =
            simulate_linearized_sgd(single.params, single.data, eta_unstable, 200, 16, 1e-3, s2);
        CHECK(sim_stable.verdict == SimVerdict::Stable);
        CHECK(sim_unstable.verdict == SimVerdict::Unstable);
    }

    SUBCASE("overflow is reported as instability with the step recorded") {
        auto single = interpolating_diag(11, 3, 1);
        auto gm = gram_matrix(single.params, single.data);
        double eta_huge = 1e6 / gm.k(0, 0);
        RngStream stream(11, 53);
        auto sim = simulate_linearized_sgd(single.params, single.data, eta_huge, 100000, 4, 1e-3, stream);
        CHECK(sim.verdict == SimVerdict::Unstable);
        CHECK(sim.overflow_step > 0);
    }
}

TEST_CASE("diagonal quadratic-form ratio is maximized by uniform weights at the trace") {
    // max over w of (sum_j l_j w_j)^2 / (sum_j l_j w_j^2) equals sum_j l_j.
    RngStream stream(12, 0);
    const int k = 12;
    std::vector<double> lambda(k);
    double tr = 0.0;
    for (auto& l : lambda) {
        l = std::exp(stream.next_uniform(-2.0, 2.0));
        tr += l;
    }
    auto ratio = [&](const std::vector<double>& w) {
        double s = 0.0, q = 0.0;
        for (int j = 0; j < k; ++j) {
            s += lambda[j] * w[j];
            q += lambda[j] * w[j] * w[j];
        }
        return s * s / q;
    };

    // gradient ascent from a random start; the ratio is scale-invariant
    auto w = stream.gaussian(k);
    for (auto& v : w) v = std::abs(v) + 0.1;
    double value = ratio(w);
    for (int it = 0; it < 20000; ++it) {
        double s = 0.0, q = 0.0;
        for (int j = 0; j < k; ++j) {
            s += lambda[j] * w[j];
            q += lambda[j] * w[j] * w[j];
        }
        double step = 0.02;
        for (int j = 0; j < k; ++j) {
            double grad = (2.0 * s * lambda[j] - (s * s / q) * 2.0 * lambda[j] * w[j]) / q;
            w[j] += step * grad;
        }
        value = ratio(w);
    }
    CHECK(value == doctest::Approx(tr).epsilon(1e-6));

    std::vector<double> uniform(k, 1.0);
    CHECK(ratio(uniform) == doctest::Approx(tr).epsilon(1e-14));
}

TEST_CASE("classification aggregates the predicates") {
    SUBCASE("zero-fisher point passes everything") {
        DiagNetParams p;
        p.a = {0.0, 0.0};
        p.b = {0.0, 0.0};
        auto ds = raw_dataset(2, 2, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0});
        auto verdict = classify_minimum(p, ds, 1.0);
        CHECK(verdict.trace_check.ok);
        CHECK(verdict.spectral_check.ok);
        CHECK(verdict.loss_check.ok);
        CHECK(verdict.negative_gaps == 0);
    }
    SUBCASE("high loss requires force") {
        auto inst = interpolating_diag(13);
        Dataset shifted = inst.data;
        for (auto& y : shifted.y) y += 1.0;
        CHECK_THROWS_AS(classify_minimum(inst.params, shifted, 0.1), std::domain_error);
        ClassifyOptions opts;
        opts.force = true;
        auto verdict = classify_minimum(inst.params, shifted, 0.1, opts);
        CHECK(verdict.trace_check.high_loss_warning);
    }
    SUBCASE("a too-sharp minimum is flagged by predicate and probes") {
        auto inst = interpolating_diag(14);
        auto gm = gram_matrix(inst.params, inst.data);
        double tr = fisher_trace(gm);
        double eta_bad = 4.0 / tr;  // violates tr <= 2/eta
        ClassifyOptions opts;
        opts.simulate = true;
        opts.sim_steps = 400;
        auto verdict = classify_minimum(inst.params, inst.data, eta_bad, opts);
        CHECK_FALSE(verdict.trace_check.ok);
        CHECK(verdict.negative_gaps > 0);
        CHECK(verdict.sim_verdict == SimVerdict::Unstable);
    }
}
