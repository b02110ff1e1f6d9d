#pragma once

#include <cstddef>
#include <vector>

// Exact limits that serve as oracles for the numerical solvers. Nothing in
// here calls a solver.

namespace ekick {

enum class BackscatterRegime { WithBackscatter, NoBackscatter };

struct PointLikeResult {
    double p1;
    double p0;
    BackscatterRegime regime;
};

/// Point-like two-level excitation with forward and backward channels:
/// P1 = P/(1 + P/2)^2, maximum 1/2 at P = 2.
PointLikeResult pointlike_with_backscatter(double p1lin);

/// Point-like two-level excitation, forward channel only:
/// P1 = P/(1 + P/4)^2, maximum 1 at P = 4.
PointLikeResult pointlike_no_backscatter(double p1lin);

/// e^{-mu} mu^j / j! for j = 0..n_max (log space above mu = 30).
std::vector<double> poisson_occupations(double mean, std::size_t n_max);

/// Poisson occupations truncated once the accumulated mass reaches
/// 1 - tail (and past the mode).
std::vector<double> poisson_occupations(double mean, double tail = 1e-15);

} // namespace ekick
