#pragma once

#include <cmath>
#include <cstdint>

namespace grokxor {

// Deterministic RNG with an explicit, documented draw order. std::mt19937 +
// std::normal_distribution would work, but the normal sampler in libstdc++ is
// rejection-based (variable uniform consumption) and differs across standard
// libraries, which breaks the pinned draw-order contract that makes seeds
// portable. So: xoshiro256++ for bits, Box-Muller for normals (exactly two
// uniforms per pair of normals).

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes exactly two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // uniform() can return exactly 0; log(0) must not happen.
        while (u1 == 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Fair coin as +/-1.
    int sign() { return (next_u64() >> 63) ? 1 : -1; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, bound) by rejection on the top range.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % bound;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Named substreams: every operation that consumes randomness owns an
// independent stream derived from (master seed, domain, index), so adding or
// reordering draws in one operation never perturbs another.
enum class StreamId : std::uint64_t {
    dataset = 1,
    init = 2,
    test = 3,
    rotate = 4,
    lln = 5,
    oracle = 6,
    seed_index = 7,
};

inline std::uint64_t derive_seed(std::uint64_t master, StreamId id, std::uint64_t index = 0) {
    std::uint64_t s = master;
    (void)splitmix64(s);
    s ^= static_cast<std::uint64_t>(id) * 0x9e3779b97f4a7c15ULL;
    (void)splitmix64(s);
    s ^= index * 0xd1b54a32d192ed03ULL;
    return splitmix64(s);
}

inline Rng substream(std::uint64_t master, StreamId id, std::uint64_t index = 0) {
    return Rng(derive_seed(master, id, index));
}

}  // namespace grokxor
