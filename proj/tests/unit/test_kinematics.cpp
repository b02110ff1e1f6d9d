#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "ekick/error.hpp"
#include "ekick/kinematics.hpp"

using namespace ekick;
using hp = boost::multiprecision::cpp_bin_float_50;

namespace {

double rel_energy_hp(double c, double q)
{
    const hp cc = c, qq = q;
    return static_cast<double>(cc * sqrt(cc * cc + qq * qq) - cc * cc);
}

double rel_velocity_hp(double c, double q)
{
    const hp cc = c, qq = q;
    return static_cast<double>(cc * qq / sqrt(cc * cc + qq * qq));
}

// final |q| with E(q_f) = E(q) - loss, solved in 50 digits
double rel_final_hp(double c, double q, double loss)
{
    const hp cc = c, qq = q;
    const hp e = cc * sqrt(cc * cc + qq * qq) - loss;
    return static_cast<double>(sqrt(e * e / (cc * cc) - cc * cc));
}

} // namespace

TEST_CASE("nonrelativistic energy and velocity")
{
    const auto k = Kinematics::nonrelativistic();
    CHECK(k.energy(2.0) == 2.0);
    CHECK(k.energy(0.0) == 0.0);
    CHECK(k.group_velocity(1.5) == 1.5);
    CHECK(k.group_velocity(0.0) == 0.0);
}

TEST_CASE("relativistic energy and velocity against 50-digit arithmetic")
{
    const auto k = Kinematics::relativistic(137.0);
    CHECK(k.energy(2.0) == doctest::Approx(rel_energy_hp(137.0, 2.0)).epsilon(1e-14));
    CHECK(k.energy(2.0) == doctest::Approx(1.99989).epsilon(1e-5));
    CHECK(k.group_velocity(2.0) == doctest::Approx(rel_velocity_hp(137.0, 2.0)).epsilon(1e-14));
    CHECK(k.group_velocity(2.0) == doctest::Approx(1.99979).epsilon(1e-5));
    for (double q : {1e-6, 1e-3, 0.3, 5.0, 200.0, 1e4})
        CHECK(k.energy(q) == doctest::Approx(rel_energy_hp(137.0, q)).epsilon(1e-13));
    // energy approaches q^2/2 as c grows
    double prev = 1.0;
    for (double c : {10.0, 100.0, 1000.0, 1e4}) {
        const double err = std::abs(Kinematics::relativistic(c).energy(2.0) - 2.0);
        CHECK(err < prev);
        prev = err;
    }
    CHECK_THROWS_AS(Kinematics::relativistic(0.0), InvalidInput);
}

TEST_CASE("scattered wave vector, nonrelativistic")
{
    const auto k = Kinematics::nonrelativistic();
    auto r = k.scattered_wavevector(2.0, 1.0);
    CHECK(r.state == ChannelState::Open);
    CHECK(r.wavevector == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

    r = k.scattered_wavevector(2.0, 2.0);
    CHECK(r.state == ChannelState::AtThreshold);
    CHECK(r.wavevector == 0.0);

    r = k.scattered_wavevector(1.0, 1.0);
    CHECK(r.state == ChannelState::Closed);
    CHECK(r.wavevector == doctest::Approx(1.0).epsilon(1e-15));

    CHECK(k.threshold_wavevector(2.0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("relativistic final wave vector")
{
    const double c = 137.036;
    const auto rel = Kinematics::relativistic(c);
    for (double q : {3.0, 10.0, 50.0}) {
        const auto r = rel.scattered_wavevector(q, 1.0);
        REQUIRE(r.open());
        CHECK(r.wavevector == doctest::Approx(rel_final_hp(c, q, 1.0)).epsilon(1e-12));
        CHECK(rel.energy(rel.threshold_wavevector(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("relativistic channels converge to nonrelativistic ones")
{
    const auto nr = Kinematics::nonrelativistic();
    for (double c : {100.0, 137.036, 1000.0}) {
        const auto rel = Kinematics::relativistic(c);
        for (int i = 1; i <= 40; ++i) {
            const double q = 0.1 * c * i / 40.0;
            const double loss = 0.1 * q * q / 2.0;
            const double a = rel.scattered_wavevector(q, loss).wavevector;
            const double b = nr.scattered_wavevector(q, loss).wavevector;
            CHECK(std::abs(a - b) <= 10.0 * (q / c) * (q / c) * q);
        }
    }
}
