#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>

namespace orbit {

/// Deterministic random stream. The engine is std::mt19937_64 (bit-exact by
/// the standard); uniform and gaussian draws are derived from raw engine
/// output here instead of std::*_distribution, whose output is
/// implementation-defined. This keeps artifacts and recorded golden values
/// stable across standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    size_t uniform_index(size_t n) {
        // Modulo bias is negligible for the small n used here, but rejection
        // sampling keeps draws exact.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return static_cast<size_t>(x % n);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (one value per call).
    double gaussian() {
        constexpr double kTwoPi = 6.283185307179586476925286766559;
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    /// Normal with the given mean and variance.
    double gaussian(double mean, double variance) {
        return mean + std::sqrt(variance) * gaussian();
    }

    uint64_t next_u64() { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

/// FNV-1a 64-bit over raw bytes. Used for content hashes and stable seed
/// derivation; not cryptographic.
inline uint64_t fnv1a64(const void* bytes, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

/// splitmix64 finalizer; decorrelates derived seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Stable child-seed derivation: mixes a parent seed with a purpose tag.
inline uint64_t derive_seed(uint64_t parent, std::string_view tag, uint64_t index = 0) {
    uint64_t h = fnv1a64(tag);
    h = fnv1a64(&parent, sizeof(parent), h);
    h = fnv1a64(&index, sizeof(index), h);
    return mix64(h);
}

}  // namespace orbit
