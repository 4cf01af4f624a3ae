#include "stabilitylab/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "stabilitylab/linalg.hpp"

namespace stabilitylab {

std::string to_string(InputDistribution d) {
    switch (d) {
        case InputDistribution::Sphere: return "sphere";
        case InputDistribution::Cube: return "cube";
        case InputDistribution::CubeIsotropic: return "cube-isotropic";
    }
    return "sphere";
}

InputDistribution input_distribution_from_string(const std::string& s) {
    if (s == "sphere") return InputDistribution::Sphere;
    if (s == "cube") return InputDistribution::Cube;
    if (s == "cube-isotropic") return InputDistribution::CubeIsotropic;
    throw std::invalid_argument("unknown input distribution: " + s);
}

Teacher make_teacher_relu(int k, int d, RngStream& stream) {
    if (k < 1 || d < 1) throw std::invalid_argument("make_teacher_relu: k, d must be positive");
    Teacher t;
    t.kind = Teacher::Kind::ReluSum;
    t.k = k;
    t.d = d;
    t.dirs.reserve(static_cast<std::size_t>(k) * d);
    for (int i = 0; i < k; ++i) {
        auto v = stream.unit_sphere(static_cast<std::size_t>(d));
        t.dirs.insert(t.dirs.end(), v.begin(), v.end());
    }
    return t;
}

Teacher make_teacher_linear(std::vector<double> beta_star) {
    if (beta_star.empty()) throw std::invalid_argument("make_teacher_linear: empty beta");
    Teacher t;
    t.kind = Teacher::Kind::Linear;
    t.d = static_cast<int>(beta_star.size());
    t.beta_star = std::move(beta_star);
    return t;
}

double evaluate_teacher(const Teacher& t, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(t.d))
        throw std::invalid_argument("evaluate_teacher: dimension mismatch");
    if (t.kind == Teacher::Kind::Linear)
        return dot(t.beta_star, x);
    double out = 0.0;
    for (int i = 0; i < t.k; ++i) {
        std::span<const double> v{t.dirs.data() + static_cast<std::size_t>(i) * t.d,
                                  static_cast<std::size_t>(t.d)};
        double z = dot(v, x);
        if (z > 0.0) out += z;
    }
    return out;
}

std::vector<double> sample_sphere_inputs(int n, int d, RngStream& stream) {
    if (n < 1 || d < 1) throw std::invalid_argument("sample_sphere_inputs: n, d must be positive");
    std::vector<double> x(static_cast<std::size_t>(n) * d);
    const double radius = std::sqrt(static_cast<double>(d));
    for (int i = 0; i < n; ++i) {
        auto v = stream.unit_sphere(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(i) * d + j] = radius * v[j];
    }
    return x;
}

std::vector<double> sample_cube_inputs(int n, int d, RngStream& stream) {
    if (n < 1 || d < 1) throw std::invalid_argument("sample_cube_inputs: n, d must be positive");
    std::vector<double> x(static_cast<std::size_t>(n) * d);
    for (auto& v : x) v = stream.next_uniform(-1.0, 1.0);
    return x;
}

std::vector<double> sample_inputs(InputDistribution dist, int n, int d, RngStream& stream) {
    switch (dist) {
        case InputDistribution::Sphere:
            return sample_sphere_inputs(n, d, stream);
        case InputDistribution::Cube:
            return sample_cube_inputs(n, d, stream);
        case InputDistribution::CubeIsotropic: {
            auto x = sample_cube_inputs(n, d, stream);
            const double s = std::sqrt(3.0);  // unit per-coordinate variance
            for (auto& v : x) v *= s;
            return x;
        }
    }
    throw std::invalid_argument("sample_inputs: bad distribution");
}

Dataset build_dataset(int n, int d, std::vector<double> inputs, const Teacher& t, DatasetMeta meta) {
    if (inputs.size() != static_cast<std::size_t>(n) * d)
        throw std::invalid_argument("build_dataset: input shape mismatch");
    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.x = std::move(inputs);
    ds.y.resize(n);
    ds.meta = std::move(meta);
    for (int i = 0; i < n; ++i) ds.y[i] = evaluate_teacher(t, ds.row(i));
    return ds;
}

Dataset build_test_set(const Teacher& t, InputDistribution dist, int n_test, RngStream& stream) {
    auto inputs = sample_inputs(dist, n_test, t.d, stream);
    DatasetMeta meta{to_string(dist), t.kind == Teacher::Kind::Linear ? "linear" : "relu-sum",
                     stream.seed()};
    return build_dataset(n_test, t.d, std::move(inputs), t, std::move(meta));
}

void dump_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_dataset_csv: cannot open " + path.string());
    for (int j = 0; j < ds.d; ++j) out << "x_" << (j + 1) << ",";
    out << "y\n";
    char buf[32];
    for (int i = 0; i < ds.n; ++i) {
        for (int j = 0; j < ds.d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.x[static_cast<std::size_t>(i) * ds.d + j]);
            out << buf << ",";
        }
        std::snprintf(buf, sizeof buf, "%.17g", ds.y[i]);
        out << buf << "\n";
    }
}

} // namespace stabilitylab
