// SPDX-License-Identifier: Apache-2.0
//
// Percentile and reduction helpers, pinned against values computed with an
// independent implementation of the same interpolation convention.

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "cfmm/metrics.hpp"

using namespace cfmm;

TEST_CASE("linear-interpolation percentiles", "[metrics]") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    REQUIRE(percentile(v, 50.0) == Catch::Approx(2.5).epsilon(1e-15));
    REQUIRE(percentile(v, 0.0) == 1.0);
    REQUIRE(percentile(v, 100.0) == 4.0);
    REQUIRE(percentile(v, 5.0) == Catch::Approx(1.15).epsilon(1e-15));

    // Unsorted input with repeats; reference values worked out by hand:
    // sorted [2,10,21,23,23,38,38], rank(q) = 6 q/100.
    const std::vector<double> w{10, 2, 38, 23, 38, 23, 21};
    REQUIRE(percentile(w, 5.0) == Catch::Approx(2.0 + 0.3 * 8.0).epsilon(1e-15));
    REQUIRE(percentile(w, 50.0) == 23.0);
    REQUIRE(percentile(w, 95.0) == 38.0);

    const std::vector<double> one{7.5};
    for (double q : {0.0, 5.0, 50.0, 100.0}) REQUIRE(percentile(one, q) == 7.5);

    const std::vector<double> flat(9, 3.25);
    for (double q : {0.0, 5.0, 50.0, 95.0, 100.0})
        REQUIRE(percentile(flat, q) == 3.25);

    REQUIRE_THROWS_AS(percentile({}, 50.0), std::invalid_argument);
    REQUIRE_THROWS_AS(percentile(v, -1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(percentile(v, 101.0), std::invalid_argument);
}

TEST_CASE("percentiles are monotone in the level", "[metrics]") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<double> v(257);
    for (auto& x : v) x = u(gen);
    double prev = percentile(v, 0.0);
    for (double q = 1.0; q <= 100.0; q += 1.0) {
        const double cur = percentile(v, q);
        REQUIRE(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("uniform sample puts the 5th percentile near 0.05", "[metrics]") {
    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(10000);
    for (auto& x : v) x = u(gen);
    REQUIRE(std::abs(percentile(v, 5.0) - 0.05) < 0.02);
    REQUIRE(std::abs(percentile(v, 50.0) - 0.5) < 0.02);
}

TEST_CASE("mean and standard error", "[metrics]") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    REQUIRE(mean_of(v) == Catch::Approx(2.5).epsilon(1e-15));
    // Sample variance 5/3, standard error sqrt(5/12).
    REQUIRE(std_error_of(v) ==
            Catch::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-12));
    REQUIRE(std_error_of({42.0}) == 0.0);
    REQUIRE_THROWS_AS(mean_of({}), std::invalid_argument);
    REQUIRE_THROWS_AS(std_error_of({}), std::invalid_argument);
}
