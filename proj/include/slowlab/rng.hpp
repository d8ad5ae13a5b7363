#pragma once

#include <cmath>
#include <cstdint>

namespace slowlab {

// Counter-based stream RNG. A stream is addressed by (seed, tag, a, b, c);
// draws within a stream are sequential splitmix64 outputs of a key derived
// from the address, so two streams never share state and results do not
// depend on which thread runs which stream.
class StreamRng {
public:
    static constexpr std::uint64_t kTagOptim = 0x6f7074696dULL;    // worker chains
    static constexpr std::uint64_t kTagEpoch = 0x65706f6368ULL;    // shared permutations
    static constexpr std::uint64_t kTagSde = 0x736465ULL;          // Brownian increments
    static constexpr std::uint64_t kTagNoise = 0x6e6f697365ULL;    // model noise sampling

    StreamRng(std::uint64_t seed, std::uint64_t tag,
              std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0)
        : state_(derive_key(seed, tag, a, b, c)), cached_(false), cache_(0.0) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return finalize(state_);
    }

    /// Uniform in [0, 1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller; second value cached.
    double next_gaussian() {
        if (cached_) {
            cached_ = false;
            return cache_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        while (u1 <= 0.0) u1 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925287 * u2;
        cache_ = r * std::sin(t);
        cached_ = true;
        return r * std::cos(t);
    }

    /// Standard normal truncated to [-bound, bound] by resampling.
    double next_gaussian_truncated(double bound) {
        double g = next_gaussian();
        while (std::abs(g) > bound) g = next_gaussian();
        return g;
    }

private:
    static std::uint64_t finalize(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag,
                                    std::uint64_t a, std::uint64_t b, std::uint64_t c) {
        std::uint64_t k = finalize(seed + 0x9e3779b97f4a7c15ULL);
        k = finalize(k ^ tag);
        k = finalize(k + a);
        k = finalize(k + b);
        k = finalize(k + c);
        return k;
    }

    std::uint64_t state_;
    bool cached_;
    double cache_;
};

}  // namespace slowlab
