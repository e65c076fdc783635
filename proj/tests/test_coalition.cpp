#include <cstdint>

#include "doctest.h"
#include "recalx/coalition.hpp"
#include "recalx/error.hpp"

using recalx::Coalition;
using recalx::Error;

TEST_CASE("factories build the expected masks") {
    CHECK(Coalition::empty(5).kept == 0);
    CHECK(Coalition::empty(5).size() == 0);
    CHECK(Coalition::full(5).kept == 0b11111u);
    CHECK(Coalition::full(5).is_full());
    CHECK(Coalition::full(64).kept == ~std::uint64_t{0});
    CHECK(Coalition::full(64).size() == 64);

    const Coalition s = Coalition::of({0, 3}, 4);
    CHECK(s.kept == 0b1001u);
    CHECK(s.size() == 2);
    CHECK(s.contains(0));
    CHECK_FALSE(s.contains(1));
    CHECK_FALSE(s.contains(2));
    CHECK(s.contains(3));
    CHECK_FALSE(s.contains(-1));
    CHECK_FALSE(s.contains(4));
}

TEST_CASE("with and without toggle single members") {
    const Coalition s = Coalition::of({1}, 3);
    CHECK(s.with(2).kept == 0b110u);
    CHECK(s.with(1).kept == s.kept);  // already a member
    CHECK(s.without(1).is_empty());
    CHECK(s.without(0).kept == s.kept);  // not a member
    CHECK_THROWS_AS((void)s.with(3), Error);
    CHECK_THROWS_AS((void)s.without(-1), Error);
}

TEST_CASE("validate rejects out-of-range dimensions and stray bits") {
    CHECK_THROWS_AS(Coalition(0, 0), Error);
    CHECK_THROWS_AS(Coalition(0, 65), Error);
    // bit 3 set with d = 3
    CHECK_THROWS_AS(Coalition(0b1000, 3), Error);
    CHECK_NOTHROW(Coalition(0b100, 3));
    CHECK_THROWS_AS(Coalition::of({2}, 2), Error);
}

TEST_CASE("equality compares mask and dimension") {
    CHECK(Coalition::of({0, 2}, 3) == Coalition(0b101, 3));
    CHECK_FALSE(Coalition::empty(3) == Coalition::empty(4));
}

TEST_CASE("perturbation level is the perturbed-feature fraction") {
    CHECK(recalx::perturbation_level(Coalition::full(4)) == 0.0);
    CHECK(recalx::perturbation_level(Coalition::empty(4)) == 1.0);
    CHECK(recalx::perturbation_level(Coalition::of({0}, 4)) == doctest::Approx(0.75));
    CHECK(recalx::perturbation_level(Coalition::of({0, 1, 2}, 4)) == doctest::Approx(0.25));
    // d = 3 gives non-dyadic fractions
    CHECK(recalx::perturbation_level(Coalition::of({1}, 3)) == doctest::Approx(2.0 / 3.0));
}
