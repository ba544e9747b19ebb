#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fact/math_util.hpp"
#include "fact/rng.hpp"

using namespace fact;

TEST_CASE("normal cdf reference values") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-12));
}

TEST_CASE("normal quantile inverts the cdf") {
    // Dual-route check: quantile then CDF must reproduce the probability.
    for (double p : {1e-8, 1e-4, 0.01, 0.025, 0.1, 0.5, 0.9, 0.975, 0.99, 1.0 - 1e-6}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("ks distance on a hand-computed sample") {
    // Sample {-1, 0, 1}: empirical CDF steps at 1/3; the largest gap against
    // Phi is at x = -1 (|Phi(-1) - 1/3| is smaller than |Phi(1) - 2/3|? both
    // symmetric) -> D = max(Phi(-1), 1/3 - ...) computed directly here.
    const double phi1 = normal_cdf(1.0);
    const double expected = std::max({normal_cdf(-1.0) - 0.0, 1.0 / 3.0 - normal_cdf(-1.0),
                                      normal_cdf(0.0) - 1.0 / 3.0, 2.0 / 3.0 - 0.5,
                                      phi1 - 2.0 / 3.0, 1.0 - phi1});
    CHECK(ks_distance_normal({-1.0, 0.0, 1.0}) == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(ks_distance_normal({}), std::invalid_argument);
}

TEST_CASE("ks p-value is monotone and bounded") {
    CHECK(ks_pvalue(100, 0.01) > 0.99);
    CHECK(ks_pvalue(100, 0.3) < 1e-6);
    double prev = 1.0;
    for (double d = 0.02; d < 0.3; d += 0.02) {
        const double p = ks_pvalue(100, d);
        CHECK(p <= prev);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
    }
}

TEST_CASE("rng uniform01 moments and determinism") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng rng(7);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sum2 / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("rng normal moments") {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng bounded stays in range and covers values") {
    Rng rng(3);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 10000; ++i) {
        const auto v = rng.bounded(10);
        REQUIRE(v < 10);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) CHECK(c > 800);
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(0, 0) != derive_seed(0, 1));
    CHECK(derive_seed(0, 0) != derive_seed(1, 0));
    CHECK(derive_seed(5, 7) == derive_seed(5, 7));
}
