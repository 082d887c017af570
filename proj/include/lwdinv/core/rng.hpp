#pragma once

#include <cmath>
#include <cstdint>

namespace lwdinv {

/// Counter-based random generator. Every draw is a pure hash of
/// (key, stream, counter), so independent streams can be handed out per
/// sample index and the k-th stream always produces the same values no
/// matter how work is split across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(seed), stream_(stream) {}

    /// Independent stream derived from this generator's key.
    Rng stream(std::uint64_t idx) const {
        return Rng(key_, mix_(stream_ * 0x9E3779B97F4A7C15ull + idx + 1));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + 0x9E3779B97F4A7C15ull * (stream_ + 1);
        z = mix_(z);
        z ^= mix_(counter_ + 0xD1B54A32D192ED03ull);
        ++counter_;
        return mix_(z);
    }

    /// Uniform in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Standard normal via Box-Muller (one value per two draws; the
    /// second is discarded to keep draw counts position-independent).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t seed() const { return key_; }

private:
    static std::uint64_t mix_(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace lwdinv
