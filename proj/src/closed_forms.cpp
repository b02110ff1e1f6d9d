#include "ekick/closed_forms.hpp"

#include <cmath>

#include "ekick/error.hpp"

namespace ekick {
namespace {

void require_probability_scale(double p1lin)
{
    if (!(p1lin >= 0.0))
        throw InvalidInput("linear probability must be non-negative");
}

double poisson_term(double mean, std::size_t j)
{
    if (mean == 0.0)
        return j == 0 ? 1.0 : 0.0;
    if (mean > 30.0)
        return std::exp(-mean + double(j) * std::log(mean) - std::lgamma(double(j) + 1.0));
    double term = std::exp(-mean);
    for (std::size_t k = 1; k <= j; ++k)
        term *= mean / double(k);
    return term;
}

} // namespace

PointLikeResult pointlike_with_backscatter(double p1lin)
{
    require_probability_scale(p1lin);
    if (std::isinf(p1lin))
        return {0.0, 1.0, BackscatterRegime::WithBackscatter};
    const double d = 1.0 + 0.5 * p1lin;
    const double p1 = p1lin / (d * d);
    return {p1, 1.0 - p1, BackscatterRegime::WithBackscatter};
}

PointLikeResult pointlike_no_backscatter(double p1lin)
{
    require_probability_scale(p1lin);
    if (std::isinf(p1lin))
        return {0.0, 1.0, BackscatterRegime::NoBackscatter};
    const double d = 1.0 + 0.25 * p1lin;
    const double p1 = p1lin / (d * d);
    return {p1, 1.0 - p1, BackscatterRegime::NoBackscatter};
}

std::vector<double> poisson_occupations(double mean, std::size_t n_max)
{
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw InvalidInput("Poisson mean must be non-negative and finite");
    std::vector<double> p(n_max + 1);
    if (mean <= 30.0) {
        // running product keeps successive terms consistent to the last bit
        double term = std::exp(-mean);
        for (std::size_t j = 0; j <= n_max; ++j) {
            if (j > 0)
                term *= mean / double(j);
            p[j] = mean == 0.0 ? (j == 0 ? 1.0 : 0.0) : term;
        }
    } else {
        for (std::size_t j = 0; j <= n_max; ++j)
            p[j] = poisson_term(mean, j);
    }
    return p;
}

std::vector<double> poisson_occupations(double mean, double tail)
{
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw InvalidInput("Poisson mean must be non-negative and finite");
    if (!(tail > 0.0))
        throw InvalidInput("Poisson tail tolerance must be positive");
    std::vector<double> p;
    double mass = 0.0;
    for (std::size_t j = 0;; ++j) {
        const double t = poisson_term(mean, j);
        p.push_back(t);
        mass += t;
        if (double(j) > mean && 1.0 - mass < tail)
            break;
        if (j > 100000)
            break;
    }
    return p;
}

} // namespace ekick
