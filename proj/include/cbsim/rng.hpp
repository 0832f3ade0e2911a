#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cbsim {

// Counter-based random numbers. Every draw is a pure function of
// (seed, agent, arm, round), so substreams are independent of execution
// order and a batch of runs can be fanned out across workers without any
// shared generator state.
namespace rng {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t combine(std::uint64_t state, std::uint64_t value) {
    return mix64(state ^ (value + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2)));
}

// Substream key for one (agent, arm) pair of one seeded run.
inline std::uint64_t stream_key(std::uint64_t seed, int agent, int arm) {
    return combine(combine(mix64(seed), static_cast<std::uint64_t>(agent) + 1),
                   static_cast<std::uint64_t>(arm) + 1);
}

// Uniform in [0, 1) from 53 random bits.
inline double uniform01(std::uint64_t word) {
    return static_cast<double>(word >> 11) * 0x1.0p-53;
}

// Standard normal draw for counter `t` of the given substream (Box-Muller).
inline double standard_normal(std::uint64_t key, std::uint64_t t) {
    const std::uint64_t w1 = combine(key, 2 * t);
    const std::uint64_t w2 = combine(key, 2 * t + 1);
    const double u1 = uniform01(w1) + 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01(w2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng

// Deterministic uniform helper stream for everything that is not reward
// sampling (instance generation, shuffles). Counter-based like the reward
// streams.
class UniformStream {
public:
    explicit UniformStream(std::uint64_t seed) : key_(rng::mix64(seed)) {}

    double next_uniform() { return rng::uniform01(rng::combine(key_, counter_++)); }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace cbsim
