#pragma once

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <string_view>
#include <vector>

#include "recalx/error.hpp"

// Deterministic randomness for the whole toolkit.
//
// Every random choice in the library flows through one of two fixed,
// implementation-defined-free algorithms so that identical seeds produce
// identical bytes on any platform:
//
//   * splitmix64        — seed expansion and integer mixing
//   * xoshiro256**      — the sampling stream (Blackman & Vigna)
//
// Derived seeds are built with mix64(...) / derive_seed(seed, name); the
// standard <random> distributions are never used because their output is
// implementation-defined.

namespace recalx {

constexpr std::uint64_t splitmix64_step(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Order-sensitive combiner: mix64(a, b) != mix64(b, a) in general.
constexpr std::uint64_t mix64(std::uint64_t a) {
    std::uint64_t s = a;
    return splitmix64_step(s);
}

template <typename... Rest>
constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b, Rest... rest) {
    std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
    return mix64(splitmix64_step(s) ^ b, rest...);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Per-component seed derivation used by the CLI and the fitting routines.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) {
    return mix64(seed, fnv1a64(component));
}

// xoshiro256** stream seeded via splitmix64 expansion.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_step(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
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
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0,n). Unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        require(n > 0, ErrorCode::invalid_argument, "Rng::below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via the polar (Marsaglia) method. One value per call;
    // the pair partner is discarded so call sites stay stateless.
    double normal() {
        for (;;) {
            const double u = 2.0 * uniform01() - 1.0;
            const double v = 2.0 * uniform01() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) {
                return u * std::sqrt(-2.0 * std::log(s) / s);
            }
        }
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Uniform random k-subset of {0..d-1} as a bitmask (partial Fisher-Yates
    // over an index array; d <= 64).
    std::uint64_t subset_mask(int d, int k) {
        require(d >= 0 && d <= 64 && k >= 0 && k <= d, ErrorCode::invalid_argument,
                "Rng::subset_mask: need 0 <= k <= d <= 64");
        std::vector<int> idx(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
        std::uint64_t mask = 0;
        for (int i = 0; i < k; ++i) {
            const std::size_t j =
                static_cast<std::size_t>(i) +
                static_cast<std::size_t>(below(static_cast<std::uint64_t>(d - i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
            mask |= (std::uint64_t{1} << idx[static_cast<std::size_t>(i)]);
        }
        return mask;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace recalx
