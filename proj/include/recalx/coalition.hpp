#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>

#include "recalx/error.hpp"

namespace recalx {

// A coalition is the set of feature indices that stay UNchanged under a
// perturbation. Stored as a bitmask over {0..d-1}; bit i set means feature i
// is kept. d <= 64.
struct Coalition {
    std::uint64_t kept = 0;
    int d = 0;

    Coalition() = default;
    Coalition(std::uint64_t kept_mask, int dim) : kept(kept_mask), d(dim) { validate(); }

    static Coalition empty(int dim) { return Coalition(0, dim); }
    static Coalition full(int dim) {
        return Coalition(dim == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << dim) - 1, dim);
    }
    static Coalition of(std::initializer_list<int> indices, int dim) {
        std::uint64_t m = 0;
        for (int i : indices) {
            require(i >= 0 && i < dim, ErrorCode::invalid_argument,
                    "Coalition::of: index out of range");
            m |= std::uint64_t{1} << i;
        }
        return Coalition(m, dim);
    }

    bool contains(int i) const { return i >= 0 && i < d && ((kept >> i) & 1u); }
    int size() const { return std::popcount(kept); }
    bool is_full() const { return size() == d; }
    bool is_empty() const { return kept == 0; }

    Coalition with(int i) const {
        require(i >= 0 && i < d, ErrorCode::invalid_argument, "Coalition::with: index out of range");
        return Coalition(kept | (std::uint64_t{1} << i), d);
    }
    Coalition without(int i) const {
        require(i >= 0 && i < d, ErrorCode::invalid_argument,
                "Coalition::without: index out of range");
        return Coalition(kept & ~(std::uint64_t{1} << i), d);
    }

    bool operator==(const Coalition& o) const { return kept == o.kept && d == o.d; }

    void validate() const {
        require(d >= 1 && d <= 64, ErrorCode::invalid_argument, "Coalition: need 1 <= d <= 64");
        if (d < 64) {
            require((kept >> d) == 0, ErrorCode::invalid_argument,
                    "Coalition: bit set at index >= d");
        }
    }
};

// Fraction of perturbed features: (d - |S|) / d, in [0,1].
inline double perturbation_level(const Coalition& s) {
    s.validate();
    return static_cast<double>(s.d - s.size()) / static_cast<double>(s.d);
}

}  // namespace recalx
