#include "stabilitylab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stabilitylab {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer (Stafford mix13).
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    base_ = mix64(mix64(seed + kGamma) ^ mix64(stream_id + 0x632BE59BD9B4E019ULL));
}

std::uint64_t RngStream::next_u64() {
    ++counter_;
    return mix64(base_ + counter_ * kGamma);
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double RngStream::next_gaussian() {
    // u1 in (0,1] keeps the log finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::next_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::next_index: n must be positive");
    // Lemire's multiply-shift with rejection of the biased region.
    while (true) {
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
    }
}

std::vector<double> RngStream::gaussian(std::size_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::gaussian: n must be positive");
    std::vector<double> out(n);
    for (auto& v : out) v = next_gaussian();
    return out;
}

std::vector<double> RngStream::uniform(std::size_t n, double lo, double hi) {
    if (n == 0) throw std::invalid_argument("RngStream::uniform: n must be positive");
    std::vector<double> out(n);
    for (auto& v : out) v = next_uniform(lo, hi);
    return out;
}

std::vector<double> RngStream::unit_sphere(std::size_t d) {
    if (d == 0) throw std::invalid_argument("RngStream::unit_sphere: d must be positive");
    std::vector<double> v(d);
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (auto& c : v) {
            c = next_gaussian();
            norm_sq += c * c;
        }
    } while (norm_sq == 0.0);
    double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& c : v) c *= inv;
    return v;
}

RngStream RngStream::derive(std::uint64_t child_id) const {
    return RngStream(seed_, mix64(stream_id_ + kGamma * (child_id + 1)));
}

} // namespace stabilitylab
