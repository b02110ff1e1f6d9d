#include "ekick/bessel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "ekick/error.hpp"

namespace ekick {
namespace {

constexpr double kEps = 1e-17;
constexpr int kMaxTerms = 500;

// K_0 and K_1 from the ascending series (A&S 9.6.13 and 9.6.11 with n=1).
std::pair<double, double> k01_series(double x)
{
    const double y = 0.25 * x * x;
    const double log_half = std::log(0.5 * x);
    const double gamma = std::numbers::egamma;

    // I_0, I_1 and the harmonic-number sums, accumulated together
    double term0 = 1.0;            // y^k / (k!)^2
    double term1 = 1.0;            // y^k / (k! (k+1)!)
    double harmonic = 0.0;         // H_k
    double i0 = 0.0, i1 = 0.0;
    double s0 = 0.0, s1 = 0.0;
    for (int k = 0; k < kMaxTerms; ++k) {
        if (k > 0) {
            term0 *= y / (double(k) * k);
            term1 *= y / (double(k) * (k + 1));
            harmonic += 1.0 / k;
        }
        i0 += term0;
        i1 += term1;
        s0 += term0 * harmonic;
        // psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
        s1 += term1 * (2.0 * harmonic + 1.0 / (k + 1) - 2.0 * gamma);
        if (term0 < kEps * i0 && term1 < kEps * i1)
            break;
    }
    i1 *= 0.5 * x;

    const double k0 = -(log_half + gamma) * i0 + s0;
    const double k1 = 1.0 / x + i1 * log_half - 0.25 * x * s1;
    return {k0, k1};
}

// Steed's continued fraction CF2 (Temme's normalization) for x >= 2.
std::pair<double, double> k01_continued_fraction(double x)
{
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxTerms; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < kEps)
            break;
    }
    h *= a1;
    const double k0 = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
    const double k1 = k0 * (x + 0.5 - h) / x;
    return {k0, k1};
}

} // namespace

double bessel_k(int order, double x)
{
    if (order < 0)
        throw InvalidInput("bessel_k: order must be non-negative, got " + std::to_string(order));
    if (!(x > 0.0))
        throw InvalidInput("bessel_k: argument must be positive, got " + std::to_string(x));
    if (std::isinf(x))
        return 0.0;

    auto [km, kp] = x < 2.0 ? k01_series(x) : k01_continued_fraction(x);
    if (order == 0)
        return km;
    for (int m = 1; m < order; ++m) {
        const double next = km + (2.0 * m / x) * kp;
        km = kp;
        kp = next;
    }
    return kp;
}

} // namespace ekick
