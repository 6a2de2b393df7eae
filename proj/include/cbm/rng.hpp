#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cbm {

// SplitMix64 finalizer; good avalanche, cheap, stable across platforms.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Stream derivation scheme used everywhere: every random quantity in the
// project draws from a stream identified by (master_seed, purpose_tag, index).
inline std::uint64_t hash64(std::uint64_t master_seed, std::string_view purpose_tag,
                            std::uint64_t replication_index) {
    return mix64(mix64(mix64(master_seed) ^ fnv1a64(purpose_tag)) ^ replication_index);
}

// A seeded random stream with the distribution helpers the simulator needs.
// Instances are cheap; give each episode / rollout / task its own stream.
class Rng {
public:
    explicit Rng(std::uint64_t stream_id) : eng_(stream_id) {}
    Rng(std::uint64_t master_seed, std::string_view purpose_tag, std::uint64_t index)
        : eng_(hash64(master_seed, purpose_tag, index)) {}

    std::uint64_t u64() { return eng_(); }

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(eng_);
    }

    // inclusive bounds
    long uniform_int(long lo, long hi) {
        return std::uniform_int_distribution<long>(lo, hi)(eng_);
    }

    long poisson(double mean) {
        return std::poisson_distribution<long>(mean)(eng_);
    }

    // shape/rate parameterization
    double gamma(double shape, double rate) {
        return std::gamma_distribution<double>(shape, 1.0 / rate)(eng_);
    }

    double beta(double a, double b) {
        double g1 = std::gamma_distribution<double>(a, 1.0)(eng_);
        double g2 = std::gamma_distribution<double>(b, 1.0)(eng_);
        return g1 / (g1 + g2);
    }

    // failures before first success, success probability p
    long geometric(double p) {
        return std::geometric_distribution<long>(p)(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace cbm
