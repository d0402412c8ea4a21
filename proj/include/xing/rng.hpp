#pragma once

#include <cstdint>
#include <initializer_list>

namespace xing {

// SplitMix64 step. Fast, full-period, and trivially reproducible across
// platforms; every random draw in the project goes through this.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1), 53-bit resolution.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Uniform integer in [0, n). Modulo bias is irrelevant at our n.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    template <class It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::uint64_t j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Derives a child seed from a master seed and a path of stream indices, so
// every sample / parameter / epoch owns an independent deterministic stream.
// Each path element passes through a full splitmix64 avalanche; a weaker
// combine collides visibly at dataset scale (thousands of small-index paths).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = master;
    std::uint64_t out = splitmix64(s);
    for (std::uint64_t p : path) {
        s = out ^ p;
        out = splitmix64(s);
    }
    return out;
}

}  // namespace xing
