#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ekick/closed_forms.hpp"
#include "ekick/error.hpp"

using namespace ekick;

TEST_CASE("point-like with backscatter")
{
    CHECK(pointlike_with_backscatter(2.0).p1 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pointlike_with_backscatter(0.0).p1 == 0.0);
    CHECK(pointlike_with_backscatter(8.0).p1 == doctest::Approx(0.32).epsilon(1e-15));
    CHECK(pointlike_with_backscatter(2.0).regime == BackscatterRegime::WithBackscatter);
}

TEST_CASE("point-like without backscatter")
{
    CHECK(pointlike_no_backscatter(4.0).p1 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pointlike_no_backscatter(1.0).p1 == doctest::Approx(0.64).epsilon(1e-15));
    CHECK(pointlike_no_backscatter(1e12).p1 < 1e-10);
    const auto r = pointlike_no_backscatter(1.0);
    CHECK(r.p0 == doctest::Approx(1.0 - r.p1).epsilon(1e-15));
    CHECK_THROWS_AS(pointlike_no_backscatter(-1.0), InvalidInput);
}

TEST_CASE("linear regime")
{
    for (double p : {1e-8, 1e-5, 1e-3}) {
        CHECK(pointlike_with_backscatter(p).p1 / p == doctest::Approx(1.0).epsilon(1.01 * p));
        CHECK(pointlike_no_backscatter(p).p1 / p == doctest::Approx(1.0).epsilon(0.51 * p));
    }
}

TEST_CASE("Poisson occupations")
{
    const auto zero = poisson_occupations(0.0, std::size_t(5));
    CHECK(zero[0] == 1.0);
    for (std::size_t j = 1; j < zero.size(); ++j)
        CHECK(zero[j] == 0.0);

    const auto one = poisson_occupations(1.0, std::size_t(3));
    CHECK(one[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(one[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(one[2] == doctest::Approx(0.18393972058572117).epsilon(1e-14));

    for (double mu : {0.25, 1.0, 4.0, 29.0, 31.0, 200.0}) {
        const auto p = poisson_occupations(mu, 1e-15);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) >= 1.0 - 1e-12);
        double mean = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j)
            mean += double(j) * p[j];
        CHECK(mean == doctest::Approx(mu).epsilon(1e-10));
    }
    // log-space branch against direct products
    const auto big = poisson_occupations(35.0, std::size_t(40));
    double direct = std::exp(-35.0);
    for (int j = 1; j <= 40; ++j)
        direct *= 35.0 / j;
    CHECK(big[40] == doctest::Approx(direct).epsilon(1e-12));
}
