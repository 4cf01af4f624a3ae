#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace stabilitylab {

/// Dense symmetric matrix of doubles. Construction symmetrizes and
/// rejects non-finite entries, so entries(i,j) == entries(j,i) exactly.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(int dim);

    static SymMatrix from_dense(int dim, std::span<const double> row_major);
    static SymMatrix diagonal(std::span<const double> diag);
    static SymMatrix identity(int dim);

    int dim() const { return dim_; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * dim_ + j]; }

    /// Sets both (i,j) and (j,i).
    void set(int i, int j, double v);

    std::span<const double> data() const { return a_; }
    std::span<double> mutable_data() { return a_; }

    double trace() const;
    double frobenius() const;

private:
    int dim_ = 0;
    std::vector<double> a_;
};

struct SymEigen {
    std::vector<double> values;   // descending
    std::vector<double> vectors;  // row-major dim x dim; column k is the k-th eigenvector
    int dim = 0;
};

/// Thrown when an iterative routine runs out of iterations; carries the
/// last estimate so callers can decide whether it is usable.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_estimate, long iterations)
        : std::runtime_error(what), last_estimate(last_estimate), iterations(iterations) {}
    double last_estimate;
    long iterations;
};

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
/// Accurate for the moderate sizes used here (n up to ~1000).
SymEigen sym_eigen(const SymMatrix& m, bool with_vectors = true);

/// Eigenvalues only, sorted descending.
std::vector<double> sym_eigenvalues(const SymMatrix& m);

/// Largest eigenvalue of a positive semi-definite matrix by power
/// iteration with a deterministic start vector. Throws ConvergenceError
/// if the Rayleigh quotient has not settled after max_iter sweeps.
double power_iteration_top(const SymMatrix& m, double tol = 1e-10, long max_iter = 50000);

// Small dense helpers shared across modules (row-major storage).
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
void matvec(const SymMatrix& m, std::span<const double> x, std::span<double> out);

/// C = A * B for square row-major matrices of size n.
void matmul_square(int n, std::span<const double> a, std::span<const double> b, std::span<double> c);

} // namespace stabilitylab
