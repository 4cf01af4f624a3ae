#pragma once

#include <cstdint>
#include <vector>

namespace stabilitylab {

/// Counter-based pseudo-random stream. Output is a pure function of
/// (seed, stream_id, counter), so sequences replay identically across
/// runs and machines, and distinct stream_ids give independent streams
/// that can be consumed concurrently.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double next_double();
    double next_uniform(double lo, double hi);

    /// Standard normal via Box-Muller; consumes exactly two raw draws.
    double next_gaussian();

    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t next_index(std::uint64_t n);

    std::vector<double> gaussian(std::size_t n);
    std::vector<double> uniform(std::size_t n, double lo, double hi);

    /// Point on the unit sphere in R^d (gaussian sample, normalized).
    std::vector<double> unit_sphere(std::size_t d);

    /// Independent stream derived from this one's identity. Does not
    /// advance or depend on the parent's counter.
    RngStream derive(std::uint64_t child_id) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

} // namespace stabilitylab
