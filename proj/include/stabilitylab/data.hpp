#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stabilitylab/rng.hpp"

namespace stabilitylab {

/// Input distributions.
///   sphere          uniform on the radius-sqrt(d) sphere
///   cube            coordinates iid uniform on [-1, 1]
///   cube-isotropic  the cube scaled by sqrt(3), so E[x x^T] = I_d
enum class InputDistribution { Sphere, Cube, CubeIsotropic };

std::string to_string(InputDistribution d);
InputDistribution input_distribution_from_string(const std::string& s);

/// Target function: a sum of k unit-direction ReLU ridges, or a linear map.
struct Teacher {
    enum class Kind { ReluSum, Linear };
    Kind kind = Kind::Linear;
    int k = 0;                      // number of ridge directions (ReluSum)
    int d = 0;                      // input dimension
    std::vector<double> dirs;       // k x d unit rows (ReluSum)
    std::vector<double> beta_star;  // d coefficients (Linear)
};

Teacher make_teacher_relu(int k, int d, RngStream& stream);
Teacher make_teacher_linear(std::vector<double> beta_star);
double evaluate_teacher(const Teacher& t, std::span<const double> x);

struct DatasetMeta {
    std::string distribution;
    std::string teacher;
    std::uint64_t seed = 0;
};

/// Noiseless training or test set: y_i = f*(x_i) exactly.
struct Dataset {
    int n = 0;
    int d = 0;
    std::vector<double> x;  // n x d row-major
    std::vector<double> y;  // n labels
    DatasetMeta meta;

    std::span<const double> row(int i) const {
        return {x.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
    }
};

std::vector<double> sample_sphere_inputs(int n, int d, RngStream& stream);
std::vector<double> sample_cube_inputs(int n, int d, RngStream& stream);
std::vector<double> sample_inputs(InputDistribution dist, int n, int d, RngStream& stream);

Dataset build_dataset(int n, int d, std::vector<double> inputs, const Teacher& t, DatasetMeta meta = {});

inline constexpr int kDefaultTestSetSize = 10000;

/// Fresh sample from the same input distribution, for population-risk
/// estimates. Use a stream id distinct from the training set's.
Dataset build_test_set(const Teacher& t, InputDistribution dist, int n_test, RngStream& stream);

/// Debug dump, header row x_1,...,x_d,y.
void dump_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

} // namespace stabilitylab
