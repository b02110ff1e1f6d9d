#include "ekick/coupling.hpp"

#include <cmath>
#include <numbers>

#include "ekick/bessel.hpp"
#include "ekick/error.hpp"

namespace ekick {
namespace {

constexpr double pi = std::numbers::pi;

double factorial(int n)
{
    double f = 1.0;
    for (int k = 2; k <= n; ++k)
        f *= k;
    return f;
}

void require_positive(double value, const char* what)
{
    if (!(value > 0.0) || !std::isfinite(value))
        throw InvalidInput(std::string(what) + " must be positive and finite");
}

// (sign q)^sigma |q|^l K_m(|q| R)
double kernel(const TransitionSymmetry& s, double q, double impact)
{
    const double aq = std::abs(q);
    double value = std::pow(aq, s.l) * bessel_k(s.m, aq * impact);
    if (s.sigma == 1 && q < 0.0)
        value = -value;
    return value;
}

double kernel_limit_at_zero(const TransitionSymmetry& s, double impact)
{
    // |q|^l K_m(|q|R) ~ |q|^(l-m) (m-1)! 2^(m-1) / R^m for m > 0
    if (s.m == 0 || s.l > s.m)
        return 0.0;
    return factorial(s.m - 1) * std::pow(2.0, s.m - 1) / std::pow(impact, s.m);
}

} // namespace

TransitionSymmetry TransitionSymmetry::of(Symmetry s) noexcept
{
    switch (s) {
    case Symmetry::px: return {s, 1, 1, 0};
    case Symmetry::pz: return {s, 1, 0, 1};
    case Symmetry::dz2: return {s, 2, 0, 0};
    case Symmetry::dxz: return {s, 2, 1, 1};
    case Symmetry::dx2y2: return {s, 2, 2, 0};
    }
    return {Symmetry::px, 1, 1, 0};
}

TransitionSymmetry TransitionSymmetry::parse(std::string_view name)
{
    if (name == "p_x" || name == "px") return of(Symmetry::px);
    if (name == "p_z" || name == "pz") return of(Symmetry::pz);
    if (name == "d_z2" || name == "dz2") return of(Symmetry::dz2);
    if (name == "d_xz" || name == "dxz") return of(Symmetry::dxz);
    if (name == "d_x2y2" || name == "dx2y2") return of(Symmetry::dx2y2);
    throw InvalidInput("unknown symmetry '" + std::string(name) + "'");
}

std::string TransitionSymmetry::label() const
{
    switch (name) {
    case Symmetry::px: return "p_x";
    case Symmetry::pz: return "p_z";
    case Symmetry::dz2: return "d_z2";
    case Symmetry::dxz: return "d_xz";
    case Symmetry::dx2y2: return "d_x2y2";
    }
    return "?";
}

std::vector<Symmetry> all_symmetries()
{
    return {Symmetry::px, Symmetry::pz, Symmetry::dz2, Symmetry::dxz, Symmetry::dx2y2};
}

CouplingModel::CouplingModel(TransitionSymmetry sym, double impact, double amp, bool backscatter)
    : symmetry(sym), impact_parameter(impact), amplitude(amp), backscatter_in_normalization(backscatter)
{
    require_positive(impact, "impact parameter");
    if (!(amp >= 0.0) || !std::isfinite(amp))
        throw InvalidInput("coupling amplitude must be non-negative and finite");
}

PointLikeCoupling::PointLikeCoupling(double g10) : strength(g10)
{
    require_positive(g10, "point-like coupling strength");
}

double momentum_coupling(const CouplingModel& model, double q)
{
    if (q == 0.0)
        throw InvalidInput("momentum_coupling: zero wave-vector transfer");
    return model.amplitude * kernel(model.symmetry, q, model.impact_parameter);
}

double momentum_coupling_or_limit(const CouplingModel& model, double q)
{
    if (q == 0.0)
        return model.amplitude * kernel_limit_at_zero(model.symmetry, model.impact_parameter);
    return model.amplitude * kernel(model.symmetry, q, model.impact_parameter);
}

namespace {

template <class T>
complex realspace_value(const CouplingModel& model, T z)
{
    const double r = model.impact_parameter;
    const T s = r * r + z * z;
    const T s32 = s * std::sqrt(s);
    const T s52 = s32 * s;
    const double a = model.amplitude;
    const complex i(0.0, 1.0);
    switch (model.symmetry.name) {
    case Symmetry::px: return complex(a * pi * r / s32);
    case Symmetry::pz: return i * complex(a * pi * z / s32);
    case Symmetry::dz2: return complex(a * pi * (r * r - 2.0 * z * z) / s52);
    case Symmetry::dxz: return i * complex(a * 3.0 * pi * z * r / s52);
    case Symmetry::dx2y2: return complex(a * 3.0 * pi * r * r / s52);
    }
    return {};
}

} // namespace

complex realspace_coupling(const CouplingModel& model, double z)
{
    return realspace_value(model, z);
}

complex realspace_coupling(const CouplingModel& model, complex z)
{
    return realspace_value(model, z);
}

complex multipole_coupling(int l, int m, double q_transfer, double impact, double azimuth)
{
    if (l < 1)
        throw InvalidInput("multipole_coupling: l must be >= 1");
    if (std::abs(m) > l)
        throw InvalidInput("multipole_coupling: |m| must not exceed l");
    if (q_transfer == 0.0)
        throw InvalidInput("multipole_coupling: zero wave-vector transfer");
    require_positive(impact, "impact parameter");

    // (-i)^(l+m) for possibly negative l+m
    const int power = ((l + m) % 4 + 4) % 4;
    static constexpr complex minus_i_powers[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    const complex phase = minus_i_powers[power] * std::polar(1.0, m * azimuth);
    const double norm = 1.0 / std::sqrt(factorial(l - m) * factorial(l + m));
    const double aq = std::abs(q_transfer);
    double radial = std::pow(q_transfer, l) * bessel_k(std::abs(m), aq * impact);
    if (q_transfer < 0.0 && (m % 2 != 0))
        radial = -radial;
    return phase * norm * radial;
}

double normalize_amplitude(const TransitionSymmetry& sym, double impact, double q0, double omega10,
                           double target_p1lin, bool include_backscatter)
{
    require_positive(impact, "impact parameter");
    require_positive(omega10, "transition frequency");
    require_positive(target_p1lin, "target linear probability");
    const double q1_sq = q0 * q0 - 2.0 * omega10;
    if (!(q0 > 0.0) || !(q1_sq > 0.0))
        throw InvalidInput("normalize_amplitude: incident wave vector is below the excitation threshold");
    const double q1 = std::sqrt(q1_sq);

    double strength = std::pow(kernel(sym, q1 - q0, impact), 2);
    if (include_backscatter)
        strength += std::pow(kernel(sym, -q1 - q0, impact), 2);
    // P_lin = 4 pi^2 A^2 strength / (v0 v1) with v = q
    return std::sqrt(target_p1lin * q0 * q1 / strength) / (2.0 * pi);
}

double normalize_amplitude_nonrecoil(const TransitionSymmetry& sym, double impact, double velocity,
                                     double omega10, double target_p1lin)
{
    require_positive(impact, "impact parameter");
    require_positive(velocity, "electron velocity");
    require_positive(omega10, "transition frequency");
    require_positive(target_p1lin, "target linear probability");
    const double g = std::abs(kernel(sym, omega10 / velocity, impact));
    if (!(g > 0.0))
        throw InvalidInput("normalize_amplitude_nonrecoil: coupling underflows at this impact parameter");
    return velocity * std::sqrt(target_p1lin) / (2.0 * pi * g);
}

double ladder_factor(std::size_t j, std::size_t jp) noexcept
{
    if (jp + 1 == j)
        return std::sqrt(double(j));
    if (jp == j + 1)
        return std::sqrt(double(j + 1));
    return 0.0;
}

complex boson_ladder_coupling(std::size_t j, std::size_t jp, complex g10) noexcept
{
    const double f = ladder_factor(j, jp);
    if (f == 0.0)
        return {};
    return jp + 1 == j ? f * g10 : f * std::conj(g10);
}

complex boson_ladder_coupling(std::size_t j, std::size_t jp, const PointLikeCoupling& base) noexcept
{
    return boson_ladder_coupling(j, jp, complex{base.strength, 0.0});
}

} // namespace ekick
