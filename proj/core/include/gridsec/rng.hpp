#pragma once

#include <cstdint>
#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace gridsec {

// Seed mixing and Gaussian sampling used across the toolkit. Sampling is
// fully specified here (no std::distribution types) so that runs with the
// same seed are bit-identical on one platform.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combine a base seed with stream tags (e.g. purpose id, step index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b ^ 0x5851f42d4c957f2dULL));
}

/// Uniform double in (0, 1); never returns 0 so it is log-safe.
inline double uniform01(std::mt19937_64& eng) {
    const std::uint64_t r = eng();
    return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on explicitly converted uniforms.
inline double standard_normal(std::mt19937_64& eng) {
    const double u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

/// Stateful stream of i.i.d. N(0,1) draws.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    double next() { return standard_normal(eng_); }

    Eigen::VectorXd next_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = standard_normal(eng_);
        return v;
    }

private:
    std::mt19937_64 eng_;
};

/// Counter-keyed N(0,1) vector: a pure function of (seed, tag, key), so two
/// calls with identical arguments return identical samples.
inline Eigen::VectorXd gaussian_vector_at(std::uint64_t seed, std::uint64_t tag,
                                          std::uint64_t key, Eigen::Index n) {
    std::mt19937_64 eng(mix_seed(seed, tag, key));
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = standard_normal(eng);
    return v;
}

/// FNV-1a 64-bit hash, used for config/case fingerprints in manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace gridsec
