#include <doctest.h>

#include <cmath>
#include <fstream>

#include "stabilitylab/data.hpp"
#include "stabilitylab/linalg.hpp"

using namespace stabilitylab;

TEST_CASE("sphere rows have norm sqrt(d)") {
    RngStream stream(1, 0);
    const int n = 200, d = 7;
    auto x = sample_sphere_inputs(n, d, stream);
    const double want = std::sqrt(static_cast<double>(d));
    for (int i = 0; i < n; ++i) {
        std::span<const double> row{x.data() + static_cast<std::size_t>(i) * d,
                                    static_cast<std::size_t>(d)};
        CHECK(std::abs(norm2(row) - want) <= 1e-12);
    }
}

TEST_CASE("sphere coordinates are centered and isotropic") {
    RngStream stream(2, 0);
    const int n = 100000, d = 10;
    auto x = sample_sphere_inputs(n, d, stream);
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += x[static_cast<std::size_t>(i) * d + j];
        CHECK(std::abs(mean / n) < 0.05);
    }
    // empirical covariance close to the identity, entrywise
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) {
            double c = 0.0;
            for (int i = 0; i < n; ++i)
                c += x[static_cast<std::size_t>(i) * d + j] * x[static_cast<std::size_t>(i) * d + k];
            c /= n;
            CHECK(std::abs(c - (j == k ? 1.0 : 0.0)) < 0.05);
        }
}

TEST_CASE("cube coordinates are uniform on [-1,1]") {
    RngStream stream(3, 0);
    const int n = 100000, d = 4;
    auto x = sample_cube_inputs(n, d, stream);
    for (double v : x) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    for (int j = 0; j < d; ++j) {
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = x[static_cast<std::size_t>(i) * d + j];
            var += v * v;
        }
        CHECK(var / n == doctest::Approx(1.0 / 3.0).epsilon(0.03));
    }
    // cross-coordinate correlation near zero
    double c01 = 0.0;
    for (int i = 0; i < n; ++i)
        c01 += x[static_cast<std::size_t>(i) * d] * x[static_cast<std::size_t>(i) * d + 1];
    CHECK(std::abs(c01 / n) < 0.01);
}

TEST_CASE("isotropic cube has unit per-coordinate variance") {
    RngStream stream(4, 0);
    const int n = 100000, d = 3;
    auto x = sample_inputs(InputDistribution::CubeIsotropic, n, d, stream);
    for (int j = 0; j < d; ++j) {
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = x[static_cast<std::size_t>(i) * d + j];
            var += v * v;
        }
        CHECK(var / n == doctest::Approx(1.0).epsilon(0.03));
    }
}

TEST_CASE("teachers evaluate exactly") {
    SUBCASE("linear sparse teacher") {
        std::vector<double> beta(8, 0.0);
        beta[0] = beta[1] = beta[2] = 1.0;
        auto t = make_teacher_linear(beta);
        double l1 = 0.0;
        for (double b : t.beta_star) l1 += std::abs(b);
        CHECK(l1 == 3.0);
        std::vector<double> x(8, 0.5);
        CHECK(evaluate_teacher(t, x) == doctest::Approx(1.5));
    }
    SUBCASE("relu teacher with a dead direction") {
        Teacher t;
        t.kind = Teacher::Kind::ReluSum;
        t.k = 1;
        t.d = 3;
        t.dirs = {1.0, 0.0, 0.0};
        std::vector<double> x = {-1.0, 2.0, 2.0};
        CHECK(evaluate_teacher(t, x) == 0.0);
    }
    SUBCASE("relu teacher matches the brute-force sum") {
        RngStream stream(5, 0);
        auto t = make_teacher_relu(4, 6, stream);
        auto x = stream.gaussian(6);
        double want = 0.0;
        for (int i = 0; i < 4; ++i) {
            double z = 0.0;
            for (int j = 0; j < 6; ++j) z += t.dirs[static_cast<std::size_t>(i) * 6 + j] * x[j];
            want += std::max(z, 0.0);
        }
        CHECK(evaluate_teacher(t, x) == doctest::Approx(want).epsilon(1e-15));
        for (int i = 0; i < 4; ++i) {
            std::span<const double> dir{t.dirs.data() + static_cast<std::size_t>(i) * 6, 6};
            CHECK(std::abs(norm2(dir) - 1.0) <= 1e-14);
        }
    }
}

TEST_CASE("datasets label inputs with the teacher exactly") {
    RngStream teacher_stream(6, 0);
    auto t = make_teacher_relu(3, 5, teacher_stream);
    RngStream data_stream(6, 1);
    auto inputs = sample_sphere_inputs(50, 5, data_stream);
    auto ds = build_dataset(50, 5, inputs, t, {"sphere", "relu-sum", 6});
    for (int i = 0; i < ds.n; ++i) CHECK(ds.y[i] == evaluate_teacher(t, ds.row(i)));
}

TEST_CASE("dataset regeneration is bitwise identical") {
    auto make = [] {
        RngStream teacher_stream(9, 0);
        auto t = make_teacher_relu(2, 4, teacher_stream);
        RngStream data_stream(9, 1);
        auto inputs = sample_sphere_inputs(30, 4, data_stream);
        return build_dataset(30, 4, inputs, t, {"sphere", "relu-sum", 9});
    };
    auto a = make(), b = make();
    REQUIRE(a.x.size() == b.x.size());
    for (std::size_t i = 0; i < a.x.size(); ++i) REQUIRE(a.x[i] == b.x[i]);
    for (std::size_t i = 0; i < a.y.size(); ++i) REQUIRE(a.y[i] == b.y[i]);
}

TEST_CASE("train and test streams are independent") {
    RngStream teacher_stream(10, 0);
    auto t = make_teacher_relu(2, 4, teacher_stream);
    RngStream train_stream(10, 1), test_stream(10, 2);
    auto train_inputs = sample_sphere_inputs(20, 4, train_stream);
    auto test_set = build_test_set(t, InputDistribution::Sphere, 20, test_stream);
    // identical sizes, different draws
    bool any_diff = false;
    for (std::size_t i = 0; i < train_inputs.size(); ++i)
        if (train_inputs[i] != test_set.x[i]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("default test-set size") {
    CHECK(kDefaultTestSetSize == 10000);
}

TEST_CASE("csv dump") {
    RngStream teacher_stream(12, 0);
    auto t = make_teacher_linear({1.0, -1.0});
    RngStream data_stream(12, 1);
    auto inputs = sample_cube_inputs(5, 2, data_stream);
    auto ds = build_dataset(5, 2, inputs, t, {"cube", "linear", 12});
    auto path = std::filesystem::temp_directory_path() / "slab_ds.csv";
    dump_dataset_csv(ds, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x_1,x_2,y");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 5);
    std::filesystem::remove(path);
}
