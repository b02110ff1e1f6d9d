#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ekick/error.hpp"
#include "ekick/nonrecoil.hpp"
#include "ekick/recoil.hpp"

using namespace ekick;
using std::numbers::pi;

namespace {

const TransitionSymmetry px = TransitionSymmetry::of(Symmetry::px);

RecoilOptions fixed(int points, bool refine = false)
{
    RecoilOptions o;
    o.points = points;
    o.refine = refine;
    return o;
}

} // namespace

TEST_CASE("grid construction")
{
    const double q0 = 2.0;
    CHECK(forward_transfer(q0, 1.0) == doctest::Approx(2.0 * (1.0 - std::sqrt(0.5))).epsilon(1e-15));
    const auto g = build_grid(q0, 1.0, 6.0, 250, GridMode::CenteredForward);
    CHECK(g.range == doctest::Approx(3.5147).epsilon(1e-4));
    CHECK(g.spacing == doctest::Approx(g.range / double(g.size())).epsilon(1e-15));
    // the stated N = 250 puts the pole within 0.05 h of a bin edge, N is bumped
    CHECK(g.half_count >= 250);
    CHECK(g.half_count == 250 + g.edge_adjustments);
    const double q1 = std::sqrt(2.0);
    CHECK(q0 - q1 < g.range / 2.0);
    const double rel = (q1 - g.center) / g.spacing + 0.5;
    const double frac = rel - std::floor(rel);
    CHECK(std::min(frac, 1.0 - frac) >= 0.05);
    for (double p : g.points())
        CHECK(p > 0.0);

    CHECK_THROWS_AS(build_grid(1.0, 1.0, 6.0, 250, GridMode::CenteredForward), InvalidInput);

    const auto clipped = build_grid(q0, 1.0, 60.0, 250, GridMode::CenteredForward);
    CHECK(clipped.range_clipped);
    CHECK(clipped.point(0) - clipped.spacing / 2.0 >= 0.0);

    const auto sym = build_grid(q0, 1.0, 6.0, 250, GridMode::SymmetricFull);
    CHECK(sym.center == 0.0);
    CHECK(sym.point(0) < -q0);
    CHECK(sym.point(sym.size() - 1) > q0);
}

TEST_CASE("delta matrix diagonal")
{
    const double q0 = 2.0;
    const auto g = build_grid(q0, 1.0, 6.0, 250, GridMode::CenteredForward);
    const auto d = delta_diagonal(g, q0, 1.0);
    const double q1 = std::sqrt(2.0);
    const double eq0 = 0.5 * q0 * q0;
    int pole_bins = 0;
    for (std::size_t l = 0; l < g.size(); ++l) {
        const double p = g.point(l);
        const bool pole = std::abs(p - q1) < g.spacing / 2.0;
        if (pole) {
            ++pole_bins;
            CHECK(d[l].imag() == doctest::Approx(pi / q1).epsilon(1e-14));
        } else {
            CHECK(d[l].imag() == 0.0);
            // away from the pole the bin integral approaches the midpoint rule
            const double mid = g.spacing / (0.5 * p * p - eq0 + 1.0);
            if (std::abs(p - q1) > 20.0 * g.spacing)
                CHECK(d[l].real() == doctest::Approx(mid).epsilon(1e-3));
        }
    }
    CHECK(pole_bins == 1);

    // closed channel: real and positive
    const auto closed = delta_diagonal(g, q0, 3.0);
    for (const auto& v : closed) {
        CHECK(v.imag() == 0.0);
        CHECK(v.real() > 0.0);
    }
}

TEST_CASE("midpoint limit as h shrinks")
{
    const double q0 = 3.0;
    double prev = 1.0;
    for (int n : {100, 400, 1600}) {
        const auto g = build_grid(q0, 1.0, 6.0, n, GridMode::CenteredForward);
        const auto d = delta_diagonal(g, q0, 1.0);
        const double p = g.point(0);
        const double mid = g.spacing / (0.5 * p * p - 0.5 * q0 * q0 + 1.0);
        const double err = std::abs(d[0].real() / mid - 1.0);
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 1e-5);
}

namespace {

// PV integral of (q^2 + 1) 2 / (q^2 - qj^2 - i0+) over [a, b]
complex polynomial_oracle(double a, double b, double qj)
{
    const double re = 2.0 * (b - a)
                      + (qj * qj + 1.0) / qj * std::log(std::abs((b - qj) * (a + qj) / ((b + qj) * (a - qj))));
    int poles = 0;
    for (double s : {qj, -qj})
        poles += (a < s && s < b) ? 1 : 0;
    return {re, pi * poles * (qj * qj + 1.0) / qj};
}

double weighted_error(const MomentumGrid& g, double q0, double omega)
{
    const auto w = propagator_weights(g, q0, omega);
    complex sum = 0.0;
    for (std::size_t l = 0; l < g.size(); ++l) {
        const double q = g.point(l);
        sum += w[l] * (q * q + 1.0);
    }
    const double qj = std::sqrt(q0 * q0 - 2.0 * omega);
    const double a = g.point(0) - 0.5 * g.spacing;
    const double b = g.point(g.size() - 1) + 0.5 * g.spacing;
    return std::abs(sum - polynomial_oracle(a, b, qj));
}

} // namespace

TEST_CASE("pole-subtracted weights converge at second order")
{
    const double q0 = 3.0;
    struct Case {
        GridMode mode;
        double omega;
    };
    // omega = 0 puts the forward pole on the centre node
    for (const Case c : {Case{GridMode::CenteredForward, 1.0}, Case{GridMode::CenteredForward, 0.0},
                         Case{GridMode::SymmetricFull, 1.0}}) {
        CAPTURE(int(c.mode));
        CAPTURE(c.omega);
        const double e1 = weighted_error(build_grid(q0, 1.0, 6.0, 200, c.mode), q0, c.omega);
        const double e2 = weighted_error(build_grid(q0, 1.0, 6.0, 400, c.mode), q0, c.omega);
        CHECK(e2 < 1e-4);
        // the symmetric grid is exact up to rounding for this even integrand
        CHECK((e1 < 1e-10 || e1 / e2 > 3.0));
    }
}

TEST_CASE("bin-integrated quadrature reproduces the delta diagonal")
{
    auto g = build_grid(3.0, 1.0, 6.0, 100, GridMode::CenteredForward);
    g.quadrature = PoleQuadrature::BinIntegrated;
    const auto w = propagator_weights(g, 3.0, 1.0);
    const auto d = delta_diagonal(g, 3.0, 1.0);
    for (std::size_t l = 0; l < w.size(); ++l)
        CHECK(w[l] == d[l]);
    g.quadrature = PoleQuadrature::Subtracted;
    const auto closed = propagator_weights(g, 3.0, 6.0);
    const auto closed_bins = delta_diagonal(g, 3.0, 6.0);
    for (std::size_t l = 0; l < w.size(); ++l)
        CHECK(closed[l] == closed_bins[l]);
}

TEST_CASE("pole subtraction converges faster than bin integration")
{
    const RecoilPoint pt{px, 0.2, 5.0, 6.2};
    auto run = [&](int points, PoleQuadrature q) {
        RecoilOptions o = fixed(points);
        o.grid.quadrature = q;
        return recoil_two_level(pt, o).probability(1);
    };
    const double reference = run(2001, PoleQuadrature::Subtracted);
    const double subtracted = std::abs(run(501, PoleQuadrature::Subtracted) - reference);
    const double bins = std::abs(run(501, PoleQuadrature::BinIntegrated) - reference);
    CHECK(subtracted < 1e-5);
    CHECK(bins > 10.0 * subtracted);
}

TEST_CASE("threshold handling")
{
    const auto sol = recoil_two_level({px, 0.2, 1.0, 0.7});
    CHECK(sol.probability(1) == 0.0);
    CHECK(sol.probability(0) == 1.0);
    CHECK_FALSE(sol.solved);

    const CouplingModel c(px, 0.5, 0.1);
    const auto below = solve_two_level(c, std::sqrt(2.0 * 0.9), 1.0, fixed(501));
    CHECK(below.probability(1) == 0.0);
    CHECK(below.probability(0) == 1.0);

    CHECK_THROWS_AS(solve_two_level(c, std::sqrt(2.0 * (1.0 + 1e-6)), 1.0, fixed(501)), ThresholdExclusion);
}

TEST_CASE("linear regime")
{
    for (double p : {1e-4, 1e-3}) {
        const auto sol = recoil_two_level({px, 0.2, p, 10.0});
        CHECK(sol.probability(1) / p == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("ladder with one excited level reproduces the two-level solve")
{
    for (double e : {2.0, 10.0}) {
        const RecoilPoint pt{px, 0.2, 1.0, e};
        const auto model = recoil_coupling(pt, GridMode::CenteredForward);
        const double q0 = std::sqrt(2.0 * e);
        const auto g = auto_grid(q0, ChannelSet::two_level(1.0), model.impact_parameter, {});
        const auto a = solve_two_level(model, g, q0, 1.0);
        const auto b = solve_ladder_blocks(model, g, q0, ChannelSet::two_level(1.0));
        REQUIRE(b.levels.size() == 2);
        CHECK(std::abs(a.probability(0) - b.probability(0)) <= 1e-12);
        CHECK(std::abs(a.probability(1) - b.probability(1)) <= 1e-12);
    }
}

TEST_CASE("boson ladder at vanishing coupling")
{
    RecoilOptions o;
    o.refine = false;
    const auto sol = recoil_boson({px, 0.2, 1e-6, 10.5}, o);
    CHECK(sol.probability(0) == doctest::Approx(1.0).epsilon(1e-5));
    for (std::size_t j = 1; j < sol.levels.size(); ++j)
        CHECK(sol.probability(j) < 2e-6);
    CHECK(sol.probability(sol.truncation()) < 1e-8);
}

TEST_CASE("coupling phase leaves probabilities unchanged")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> phi(0.0, 2.0 * pi);
    const RecoilPoint pt{px, 0.2, 1.0, 5.0};
    const auto model = recoil_coupling(pt, GridMode::CenteredForward);
    const double q0 = std::sqrt(10.0);
    const auto g = build_grid(q0, 1.0, 6.0, 200, GridMode::CenteredForward);
    const auto ladder = ChannelSet::boson_ladder(1.0, 4);
    const auto ref2 = solve_two_level(model, g, q0, 1.0);
    const auto refn = solve_ladder_blocks(model, g, q0, ladder);
    for (int k = 0; k < 8; ++k) {
        const complex ph = std::polar(1.0, phi(rng));
        const auto a = solve_two_level(model, g, q0, 1.0, ph);
        const auto b = solve_ladder_blocks(model, g, q0, ladder, ph);
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::abs(a.probability(j) - ref2.probability(j)) <= 1e-12);
        for (std::size_t j = 0; j < refn.levels.size(); ++j)
            CHECK(std::abs(b.probability(j) - refn.probability(j)) <= 1e-12);
    }
}

TEST_CASE("agreement with the nonrecoil limit at high energy")
{
    const auto sol = recoil_two_level({px, 0.2, 1.0, 100.0});
    const auto nr = nonrecoil_solve({px, 0.2, 1.0});
    CHECK(std::abs(sol.probability(1) - nr.probability(1)) <= 1e-3);
    CHECK(sol.eps_conv <= 1e-3);
}

TEST_CASE("convergence diagnostic at default settings")
{
    for (double e : {2.0, 3.0, 6.0, 20.0}) {
        CAPTURE(e);
        const auto sol = recoil_two_level({px, 0.2, 1.0, e});
        CHECK(sol.refined);
        CHECK(sol.eps_conv <= 1e-3);
        CHECK(sol.eps_conv == std::max(sol.sum_deviation, sol.refinement_change));
        CHECK(sol.history.size() == 2);
    }
}

TEST_CASE("symmetric grid resolves the backward channel")
{
    RecoilOptions o;
    o.grid.mode = GridMode::SymmetricFull;
    o.points = 1201;
    const auto sol = recoil_two_level({px, 0.2, 1.0, 2.0}, o);
    CHECK(sol.levels[1].backward > 0.0);
    CHECK(std::abs(sol.levels[1].forward + sol.levels[1].backward - sol.probability(1)) < 1e-14);
    CHECK(sol.sum_deviation < 1e-2);
}

TEST_CASE("spectral profiles")
{
    auto solve = [](double q) {
        const double e = 0.5 * q * q;
        const auto s = recoil_two_level({px, 0.2, 1.0, e}, fixed(501));
        return std::vector<double>{s.probability(0), s.probability(1)};
    };
    const double q0 = std::sqrt(10.0);
    const auto mono = weighted_probability(SpectralProfile::monochromatic(q0), solve);
    const auto direct = solve(q0);
    CHECK(mono[0] == direct[0]);
    CHECK(mono[1] == direct[1]);

    const double w = 0.3;
    const SpectralProfile two({{q0, w, 1.0, 0.0}, {1.1 * q0, 1.0 - w, 1.0, 0.0}});
    const auto pa = solve(q0), pb = solve(1.1 * q0);
    const auto mix = weighted_probability(two, {pa, pb});
    CHECK(mix[1] == doctest::Approx(w * pa[1] + (1.0 - w) * pb[1]).epsilon(1e-15));

    const auto gauss = SpectralProfile::gaussian(q0, 0.01, 9);
    CHECK(gauss.normalization() == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<std::vector<double>> per_node;
    for (const auto& n : gauss.nodes())
        per_node.push_back(solve(n.q));
    const auto base = weighted_probability(gauss, per_node);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> phi(-pi, pi);
    for (int k = 0; k < 4; ++k) {
        std::vector<double> phases(gauss.nodes().size());
        for (auto& p : phases)
            p = phi(rng);
        const auto again = weighted_probability(gauss.with_phases(phases), per_node);
        CHECK(again[0] == base[0]);
        CHECK(again[1] == base[1]);
    }
    const SpectralProfile bad({{q0, 0.5, 1.0, 0.0}});
    CHECK_THROWS_AS(weighted_probability(bad, {pa}), InvalidInput);
}
