#ifndef BCGEN_COMMON_HPP
#define BCGEN_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace bcgen {

/// Raised when an input fails validation (bad dimensions, malformed files,
/// out-of-range parameters). Maps to CLI exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a computation fails at runtime (divergence, singular
/// systems, I/O failures mid-stream). Maps to CLI exit code 2.
struct ComputeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// FNV-1a 64-bit hash, used for config/content fingerprints in manifests
/// and file headers. Not cryptographic.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

std::string hex64(std::uint64_t v);

/// Deterministic RNG wrapper. Draws go through fixed bit manipulations
/// rather than std:: distributions so that streams are identical across
/// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // modulo bias is negligible for n << 2^64
        return gen_() % n;
    }

    /// Standard normal via Box-Muller (cached second deviate).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Exponential with given mean.
    double exponential(double mean) {
        double u = 0.0;
        while (u == 0.0) u = uniform();
        return -mean * std::log(u);
    }

    /// Derive an independent child stream (e.g. one per session).
    Rng child(std::uint64_t stream_id) const {
        std::uint64_t s = 0xcbf29ce484222325ull;
        s = fnv1a(&seed_echo_, sizeof seed_echo_, s);
        s = fnv1a(&stream_id, sizeof stream_id, s);
        return Rng(s);
    }

    void remember_seed(std::uint64_t seed) { seed_echo_ = seed; }

private:
    std::mt19937_64 gen_;
    std::uint64_t seed_echo_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Rng make_rng(std::uint64_t seed) {
    Rng r(seed);
    r.remember_seed(seed);
    return r;
}

}  // namespace bcgen

#endif
