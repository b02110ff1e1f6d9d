#include "ekick/recoil.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "ekick/error.hpp"

namespace ekick {
namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

constexpr double pi = std::numbers::pi;
constexpr int kMaxEdgeAdjustments = 16;
constexpr double kPreferredClearance = 0.05; // fraction of h
constexpr double kMinimumClearance = 1e-9;

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

// Signed positions of every open-channel pole, +-|q_j|.
std::vector<double> open_poles(double q0, const ChannelSet& channels)
{
    std::vector<double> poles;
    for (std::size_t j = 0; j < channels.frequencies.size(); ++j) {
        const double q2 = q0 * q0 - 2.0 * channels.frequencies[j];
        if (q2 > 0.0) {
            poles.push_back(std::sqrt(q2));
            poles.push_back(-std::sqrt(q2));
        }
    }
    return poles;
}

// Distance (in units of h) from `pole` to the nearest bin edge; +inf when
// the pole lies outside the grid.
double edge_clearance(double center, double spacing, int half_count, double pole)
{
    const double rel = (pole - center) / spacing;
    if (std::abs(rel) > half_count + 0.5 + 1e-12)
        return std::numeric_limits<double>::infinity();
    const double shifted = rel + 0.5;
    const double frac = shifted - std::floor(shifted);
    return std::min(frac, 1.0 - frac);
}

MomentumGrid make_grid(double q0, const ChannelSet& channels, double range, int half_count, GridMode mode)
{
    if (!(q0 > 0.0))
        throw InvalidInput("grid: incident wave vector must be positive");
    if (!(range > 0.0) || !std::isfinite(range))
        throw InvalidInput("grid: range must be positive and finite");
    if (half_count < 1)
        throw InvalidInput("grid: half-count N must be at least 1");

    MomentumGrid g;
    g.q0 = q0;
    g.mode = mode;
    double total = range;
    if (mode == GridMode::CenteredForward) {
        g.center = q0;
        const double max_range = 2.0 * q0 * (1.0 - 1e-9);
        if (range > max_range) {
            total = max_range;
            g.range_clipped = true;
        }
    } else {
        g.center = 0.0;
        total = 2.0 * (q0 + 0.5 * range);
    }

    const auto poles = open_poles(q0, channels);
    int best_n = -1;
    double best_clearance = -1.0;
    for (int bump = 0; bump <= kMaxEdgeAdjustments; ++bump) {
        const int n = half_count + bump;
        const double h = total / (2 * n + 1);
        double worst = std::numeric_limits<double>::infinity();
        for (double p : poles)
            worst = std::min(worst, edge_clearance(g.center, h, n, p));
        if (worst > best_clearance) {
            best_clearance = worst;
            best_n = n;
        }
        if (worst >= kPreferredClearance)
            break;
    }
    if (best_clearance < kMinimumClearance)
        throw InvalidInput("grid: cannot move channel poles off the bin edges within "
                           + std::to_string(kMaxEdgeAdjustments) + " adjustments of N");

    g.half_count = best_n;
    g.edge_adjustments = best_n - half_count;
    g.spacing = total / (2 * best_n + 1);
    g.range = total;
    return g;
}

void check_channel_distance(double q0, const ChannelSet& channels, double exclusion)
{
    const double eps0 = 0.5 * q0 * q0;
    const double scale = channels.first_excitation();
    for (std::size_t j = 1; j < channels.frequencies.size(); ++j) {
        if (std::abs(eps0 - channels.frequencies[j]) < exclusion * scale)
            throw ThresholdExclusion("incident energy " + fmt(eps0) + " lies within "
                                     + fmt(exclusion) + " of the threshold of level "
                                     + std::to_string(j));
    }
}

MatrixXcd coupling_matrix(const CouplingModel& model, const MomentumGrid& grid, complex phase)
{
    // G_10(p_l - p_l') depends on l - l' only
    const int n = int(grid.size());
    std::vector<complex> diag(2 * n - 1);
    for (int k = -(n - 1); k <= n - 1; ++k)
        diag[k + n - 1] = phase * momentum_coupling_or_limit(model, k * grid.spacing);
    MatrixXcd g(n, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r)
            g(r, c) = diag[r - c + n - 1];
    return g;
}

VectorXcd as_vector(const std::vector<complex>& v)
{
    return Eigen::Map<const VectorXcd>(v.data(), Eigen::Index(v.size()));
}

std::vector<complex> as_std(const VectorXcd& v)
{
    return {v.data(), v.data() + v.size()};
}

// M_j(q) off the grid, from the discretized equation itself:
// M_j(q) = g_j(q) - sum_j' sum_l G_jj'(q - p_l) Delta_j'(l) M_j'(l)
complex nystrom(const CouplingModel& model, const MomentumGrid& grid, double q0, complex phase,
                const std::vector<std::vector<complex>>& deltas, const std::vector<VectorXcd>& m,
                std::size_t j, double q)
{
    const std::size_t levels = m.size();
    const std::size_t n = grid.size();
    complex value = 0.0;
    if (j == 1)
        value = phase * momentum_coupling_or_limit(model, q - q0);
    if (j >= 1) {
        const double f = ladder_factor(j, j - 1);
        complex acc = 0.0;
        for (std::size_t l = 0; l < n; ++l)
            acc += momentum_coupling_or_limit(model, q - grid.point(l)) * deltas[j - 1][l] * m[j - 1](Eigen::Index(l));
        value -= f * phase * acc;
    }
    if (j + 1 < levels) {
        const double f = ladder_factor(j, j + 1);
        complex acc = 0.0;
        // G_01(t) = conj(G_10(-t))
        for (std::size_t l = 0; l < n; ++l)
            acc += momentum_coupling_or_limit(model, grid.point(l) - q) * deltas[j + 1][l] * m[j + 1](Eigen::Index(l));
        value -= f * std::conj(phase) * acc;
    }
    return value;
}

void extract_probabilities(RecoilSolution& sol, const CouplingModel& model, const MomentumGrid& grid,
                           double q0, const ChannelSet& channels, complex phase,
                           const std::vector<std::vector<complex>>& deltas, const std::vector<VectorXcd>& m)
{
    const bool backward = grid.mode == GridMode::SymmetricFull;
    sol.levels.assign(channels.frequencies.size(), {});
    for (std::size_t j = 0; j < channels.frequencies.size(); ++j) {
        const double qj2 = q0 * q0 - 2.0 * channels.frequencies[j];
        if (!(qj2 > 0.0))
            continue;
        const double qj = std::sqrt(qj2);
        const double flux = 1.0 / (q0 * qj);
        LevelProbability& p = sol.levels[j];
        const complex mf = nystrom(model, grid, q0, phase, deltas, m, j, qj);
        if (j == 0)
            p.forward = std::norm(q0 - complex(0.0, 2.0 * pi) * mf) * flux;
        else
            p.forward = 4.0 * pi * pi * std::norm(mf) * flux;
        if (backward) {
            const complex mb = nystrom(model, grid, q0, phase, deltas, m, j, -qj);
            p.backward = 4.0 * pi * pi * std::norm(mb) * flux;
        }
        p.total = p.forward + p.backward;
    }
    double sum = 0.0;
    double mean = 0.0;
    for (std::size_t j = 0; j < sol.levels.size(); ++j) {
        sum += sol.levels[j].total;
        mean += double(j) * sol.levels[j].total;
    }
    sol.sum_deviation = std::abs(sum - 1.0);
    sol.eps_conv = sol.sum_deviation;
    sol.mean_occupation = mean;
    sol.coefficients.clear();
    for (const auto& v : m)
        sol.coefficients.push_back(as_std(v));
}

std::vector<double> totals(const RecoilSolution& s)
{
    std::vector<double> out;
    for (const auto& l : s.levels)
        out.push_back(l.total);
    return out;
}

void record_history(RecoilSolution& s)
{
    s.history.push_back({s.grid.size(), s.grid.range, s.grid.spacing, totals(s)});
}

RecoilSolution trivial_solution(std::size_t levels)
{
    RecoilSolution s;
    s.levels.assign(levels, {});
    s.levels[0] = {1.0, 1.0, 0.0};
    s.solved = false;
    return s;
}

double linear_probability_recoil(const CouplingModel& model, double q0, double omega10, bool backward)
{
    const double q1 = std::sqrt(q0 * q0 - 2.0 * omega10);
    double s = std::norm(momentum_coupling(model, q1 - q0));
    if (backward)
        s += std::norm(momentum_coupling(model, -q1 - q0));
    return 4.0 * pi * pi * s / (q0 * q1);
}

MomentumGrid grid_for(const RecoilOptions& options, double q0, const ChannelSet& channels, double impact)
{
    GridPolicy policy = options.grid;
    if (options.points) {
        if (*options.points < 3)
            throw InvalidInput("grid: at least 3 points are required");
        policy.min_points = policy.max_points = *options.points | 1;
    }
    if (options.c_delta) {
        if (!(*options.c_delta > 0.0))
            throw InvalidInput("grid: c_delta must be positive");
        policy.c_delta = *options.c_delta;
        policy.kernel_decay = 0.0;
    }
    return auto_grid(q0, channels, impact, policy);
}

// Grid for the eps_conv check: 1.5x range at unchanged spacing, or 1.5x
// points when the range is already pinned by the q >= 0 clip.
MomentumGrid refined_grid(const MomentumGrid& g, const ChannelSet& channels, double factor)
{
    MomentumGrid fine;
    if (g.range_clipped || g.mode == GridMode::SymmetricFull) {
        const int n = int(std::lround(factor * g.half_count));
        const double range = g.mode == GridMode::SymmetricFull ? g.range - 2.0 * g.q0 : g.range;
        fine = make_grid(g.q0, channels, range, n, g.mode);
    } else {
        const double range = factor * g.range;
        const int n = int(std::lround(0.5 * (range / g.spacing - 1.0)));
        fine = make_grid(g.q0, channels, range, n, g.mode);
    }
    fine.quadrature = g.quadrature;
    return fine;
}

} // namespace

const char* to_string(GridMode mode) noexcept
{
    return mode == GridMode::CenteredForward ? "centered-forward" : "symmetric-full";
}

GridMode parse_grid_mode(std::string_view name)
{
    if (name == "centered-forward" || name == "forward")
        return GridMode::CenteredForward;
    if (name == "symmetric-full" || name == "full")
        return GridMode::SymmetricFull;
    throw InvalidInput("unknown grid mode '" + std::string(name) + "'");
}

const char* to_string(PoleQuadrature q) noexcept
{
    return q == PoleQuadrature::Subtracted ? "subtracted" : "bin-integrated";
}

PoleQuadrature parse_pole_quadrature(std::string_view name)
{
    if (name == "subtracted")
        return PoleQuadrature::Subtracted;
    if (name == "bin-integrated")
        return PoleQuadrature::BinIntegrated;
    throw InvalidInput("unknown pole quadrature '" + std::string(name) + "'");
}

ChannelSet ChannelSet::two_level(double omega10)
{
    if (!(omega10 > 0.0))
        throw InvalidInput("transition frequency must be positive");
    return {ChannelKind::TwoLevel, {0.0, omega10}};
}

ChannelSet ChannelSet::boson_ladder(double omega_b, std::size_t truncation)
{
    if (!(omega_b > 0.0))
        throw InvalidInput("boson frequency must be positive");
    if (truncation < 1)
        throw InvalidInput("boson truncation must be at least 1");
    ChannelSet c{ChannelKind::BosonLadder, {}};
    for (std::size_t j = 0; j <= truncation; ++j)
        c.frequencies.push_back(double(j) * omega_b);
    return c;
}

ChannelResult ChannelSet::channel(std::size_t j, double q0) const
{
    return Kinematics::nonrelativistic().scattered_wavevector(q0, frequencies.at(j));
}

std::vector<double> MomentumGrid::points() const
{
    std::vector<double> p(size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = point(i);
    return p;
}

double forward_transfer(double q0, double omega10)
{
    const double eps0 = 0.5 * q0 * q0;
    if (!(eps0 > omega10))
        throw InvalidInput("incident energy " + fmt(eps0) + " is below the excitation threshold "
                           + fmt(omega10));
    return q0 * (1.0 - std::sqrt(1.0 - omega10 / eps0));
}

MomentumGrid build_grid(double q0, double omega10, double c_delta, int half_count, GridMode mode)
{
    return build_grid(q0, ChannelSet::two_level(omega10), c_delta, half_count, mode);
}

MomentumGrid build_grid(double q0, const ChannelSet& channels, double c_delta, int half_count, GridMode mode)
{
    if (!(c_delta > 0.0))
        throw InvalidInput("grid: c_delta must be positive");
    const double range = c_delta * forward_transfer(q0, channels.first_excitation());
    return make_grid(q0, channels, range, half_count, mode);
}

MomentumGrid auto_grid(double q0, const ChannelSet& channels, double impact, const GridPolicy& policy)
{
    if (!(impact > 0.0))
        throw InvalidInput("grid: impact parameter must be positive");
    const double transfer = forward_transfer(q0, channels.first_excitation());
    const double half = std::max(0.5 * policy.c_delta * transfer, policy.kernel_decay / impact);
    double range = 2.0 * half;

    double span = range;
    if (policy.mode == GridMode::CenteredForward)
        span = std::min(range, 2.0 * q0);
    else
        span = 2.0 * (q0 + half);
    const double wanted = std::ceil(span / (policy.spacing_fraction * transfer));
    int points = int(std::clamp(wanted, double(policy.min_points), double(policy.max_points)));
    points |= 1;
    MomentumGrid g = make_grid(q0, channels, range, (points - 1) / 2, policy.mode);
    g.quadrature = policy.quadrature;
    return g;
}

std::vector<complex> delta_diagonal(const MomentumGrid& grid, double q0, double omega_j0)
{
    const double qj2 = q0 * q0 - 2.0 * omega_j0;
    const double h = grid.spacing;
    std::vector<complex> d(grid.size());
    if (qj2 > 0.0) {
        const double a = std::sqrt(qj2);
        const double lo = (a - 0.5 * h) * (a - 0.5 * h);
        const double hi = (a + 0.5 * h) * (a + 0.5 * h);
        for (std::size_t l = 0; l < d.size(); ++l) {
            const double p = grid.point(l);
            const double den = p * p - hi;
            const double num = p * p - lo;
            if (den == 0.0 || num == 0.0)
                throw InvalidInput("delta matrix: pole at a bin edge (q_j = " + fmt(a) + ")");
            // num/den = 1 + 2ah/den
            const double r = 2.0 * a * h / den;
            const double re = (1.0 + r > 0.0) ? std::log1p(r) : std::log(-(1.0 + r));
            int roots = 0;
            if (p - 0.5 * h < a && a < p + 0.5 * h)
                ++roots;
            if (p - 0.5 * h < -a && -a < p + 0.5 * h)
                ++roots;
            d[l] = complex(re, pi * roots) / a;
        }
    } else if (qj2 < 0.0) {
        const double k = std::sqrt(-qj2);
        for (std::size_t l = 0; l < d.size(); ++l) {
            const double p = grid.point(l);
            d[l] = 2.0 / k * (std::atan((p + 0.5 * h) / k) - std::atan((p - 0.5 * h) / k));
        }
    } else {
        throw ThresholdExclusion("delta matrix: channel exactly at threshold");
    }
    return d;
}

std::vector<complex> propagator_weights(const MomentumGrid& grid, double q0, double omega_j0)
{
    const double qj2 = q0 * q0 - 2.0 * omega_j0;
    if (grid.quadrature == PoleQuadrature::BinIntegrated || !(qj2 > 0.0))
        return delta_diagonal(grid, q0, omega_j0);

    // 2 / (q^2 - qj^2) = sum_s c_s / (q - s), s = +-qj, c_s = s / qj^2
    const double qj = std::sqrt(qj2);
    const double h = grid.spacing;
    const std::size_t n = grid.size();
    const double lo = grid.point(0) - 0.5 * h;
    const double hi = grid.point(n - 1) + 0.5 * h;
    std::vector<complex> w(n);
    for (std::size_t l = 0; l < n; ++l) {
        const double p = grid.point(l);
        w[l] = 2.0 * h / ((p - qj) * (p + qj));
    }
    for (double s : {qj, -qj}) {
        if (!(lo < s && s < hi))
            continue;
        const double c = s / qj2;
        const double x = (s - grid.point(0)) / h;
        const auto nearest = std::size_t(std::clamp(std::lround(x), 0L, long(n - 1)));
        const bool on_node = std::abs(x - double(nearest)) < 1e-9;
        if (on_node && (nearest == 0 || nearest + 1 == n))
            throw InvalidInput("propagator weights: pole on the outermost grid point");
        // residue coefficient K multiplying f(s)
        double sum = 0.0;
        for (std::size_t l = 0; l < n; ++l)
            if (!(on_node && l == nearest))
                sum += h / (grid.point(l) - s);
        const complex k(c * (std::log(std::abs((hi - s) / (s - lo))) - sum), pi / qj);
        if (on_node) {
            // the node's own regular term is h c f'(s); the other pole stays in w
            w[nearest] = -c * h / (2.0 * s) + k;
            w[nearest - 1] -= 0.5 * c;
            w[nearest + 1] += 0.5 * c;
            continue;
        }
        // cubic Lagrange interpolation for f(s), shrinking to linear near the ends
        auto base = std::size_t(std::floor(x));
        base = std::min(base, n - 2);
        std::size_t first = base >= 1 ? base - 1 : base;
        std::size_t last = std::min(base + 2, n - 1);
        for (std::size_t a = first; a <= last; ++a) {
            double weight = 1.0;
            for (std::size_t b = first; b <= last; ++b)
                if (b != a)
                    weight *= (x - double(b)) / (double(a) - double(b));
            w[a] += k * weight;
        }
    }
    return w;
}

RecoilSolution solve_two_level(const CouplingModel& coupling, const MomentumGrid& grid, double q0,
                               double omega10, complex phase)
{
    const ChannelSet channels = ChannelSet::two_level(omega10);
    if (0.5 * q0 * q0 < omega10)
        return trivial_solution(2);
    check_channel_distance(q0, channels, 1e-4);

    const Eigen::Index n = Eigen::Index(grid.size());
    const std::vector<std::vector<complex>> deltas = {propagator_weights(grid, q0, 0.0),
                                                      propagator_weights(grid, q0, omega10)};
    const MatrixXcd g10 = coupling_matrix(coupling, grid, phase);
    const VectorXcd d0 = as_vector(deltas[0]);
    const VectorXcd d1 = as_vector(deltas[1]);
    const MatrixXcd s10 = g10 * d0.asDiagonal();
    const MatrixXcd s01 = g10.adjoint() * d1.asDiagonal();

    MatrixXcd system = -s10 * s01;
    system.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<MatrixXcd> lu(system);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14))
        throw SingularSystem("two-level recoil system is singular (rcond " + fmt(rcond) + ")", rcond);

    VectorXcd g1(n);
    for (Eigen::Index l = 0; l < n; ++l)
        g1(l) = phase * momentum_coupling_or_limit(coupling, grid.point(std::size_t(l)) - q0);
    const VectorXcd m1 = lu.solve(g1);
    const VectorXcd m0 = -s01 * m1;

    RecoilSolution sol;
    sol.grid = grid;
    sol.rcond = rcond;
    extract_probabilities(sol, coupling, grid, q0, channels, phase, deltas, {m0, m1});
    return sol;
}

RecoilSolution solve_ladder_blocks(const CouplingModel& coupling, const MomentumGrid& grid, double q0,
                                   const ChannelSet& channels, complex phase)
{
    const std::size_t levels = channels.frequencies.size();
    if (levels < 2)
        throw InvalidInput("ladder solve needs at least two levels");
    if (0.5 * q0 * q0 < channels.first_excitation())
        return trivial_solution(levels);
    check_channel_distance(q0, channels, 1e-4);

    const Eigen::Index n = Eigen::Index(grid.size());
    std::vector<std::vector<complex>> deltas;
    for (double w : channels.frequencies)
        deltas.push_back(propagator_weights(grid, q0, w));
    const MatrixXcd g10 = coupling_matrix(coupling, grid, phase);
    const MatrixXcd g01 = g10.adjoint();

    // Row j: M_j + L_j M_{j-1} + U_j M_{j+1} = d_j with
    // L_j = sqrt(j) G10 Delta_{j-1}, U_j = sqrt(j+1) G01 Delta_{j+1}.
    // Forward sweep keeps X_j = B_j^{-1} U_j and y_j = B_j^{-1}(d_j - L_j y_{j-1}).
    std::vector<MatrixXcd> x(levels);
    std::vector<VectorXcd> y(levels);
    double rcond = 1.0;

    VectorXcd g1(n);
    for (Eigen::Index l = 0; l < n; ++l)
        g1(l) = phase * momentum_coupling_or_limit(coupling, grid.point(std::size_t(l)) - q0);

    x[0] = g01 * as_vector(deltas[1]).asDiagonal();
    y[0] = VectorXcd::Zero(n);
    for (std::size_t j = 1; j < levels; ++j) {
        const double lf = ladder_factor(j, j - 1);
        const VectorXcd dprev = as_vector(deltas[j - 1]);
        MatrixXcd block = -lf * (g10 * (dprev.asDiagonal() * x[j - 1]));
        block.diagonal().array() += 1.0;
        const Eigen::PartialPivLU<MatrixXcd> lu(block);
        rcond = std::min(rcond, lu.rcond());
        if (!(lu.rcond() > 1e-14))
            throw SingularSystem("ladder block " + std::to_string(j) + " is singular (rcond "
                                 + fmt(lu.rcond()) + ")", lu.rcond());

        VectorXcd rhs = -lf * (g10 * dprev.cwiseProduct(y[j - 1]));
        if (j == 1)
            rhs += g1;
        y[j] = lu.solve(rhs);
        if (j + 1 < levels) {
            const double uf = ladder_factor(j, j + 1);
            x[j] = lu.solve(g01) * (uf * as_vector(deltas[j + 1])).asDiagonal();
        }
    }

    std::vector<VectorXcd> m(levels);
    m[levels - 1] = y[levels - 1];
    for (std::size_t j = levels - 1; j-- > 0;)
        m[j] = y[j] - x[j] * m[j + 1];

    RecoilSolution sol;
    sol.grid = grid;
    sol.rcond = rcond;
    extract_probabilities(sol, coupling, grid, q0, channels, phase, deltas, m);
    return sol;
}

RecoilSolution solve_two_level(const CouplingModel& coupling, double q0, double omega10,
                               const RecoilOptions& options)
{
    const ChannelSet channels = ChannelSet::two_level(omega10);
    if (0.5 * q0 * q0 < omega10)
        return trivial_solution(2);
    check_channel_distance(q0, channels, options.threshold_exclusion);

    const MomentumGrid grid = grid_for(options, q0, channels, coupling.impact_parameter);
    RecoilSolution sol = solve_two_level(coupling, grid, q0, omega10, options.coupling_phase);
    record_history(sol);
    if (options.refine) {
        const MomentumGrid fine = refined_grid(grid, channels, options.refine_range_factor);
        const RecoilSolution ref = solve_two_level(coupling, fine, q0, omega10, options.coupling_phase);
        double change = 0.0;
        for (std::size_t j = 0; j < sol.levels.size(); ++j)
            change = std::max(change, std::abs(ref.levels[j].total - sol.levels[j].total));
        sol.refined = true;
        sol.refinement_change = change;
        sol.eps_conv = std::max(sol.sum_deviation, change);
        sol.history.push_back({fine.size(), fine.range, fine.spacing, totals(ref)});
    }
    return sol;
}

RecoilSolution solve_boson_ladder(const CouplingModel& coupling, double q0, double omega_b,
                                  const RecoilOptions& options)
{
    if (0.5 * q0 * q0 < omega_b) {
        const std::size_t n = options.truncation.value_or(8);
        return trivial_solution(n + 1);
    }
    const bool backward = options.grid.mode == GridMode::SymmetricFull;
    const double p1lin = linear_probability_recoil(coupling, q0, omega_b, backward);
    std::size_t n = options.truncation.value_or(
        std::max<std::size_t>(8, std::size_t(std::ceil(4.0 * p1lin + 10.0))));
    if (n < 1)
        throw InvalidInput("boson truncation must be at least 1");

    ChannelSet channels = ChannelSet::boson_ladder(omega_b, n);
    check_channel_distance(q0, channels, options.threshold_exclusion);
    MomentumGrid grid = grid_for(options, q0, channels, coupling.impact_parameter);

    RecoilSolution sol;
    for (;;) {
        sol = solve_ladder_blocks(coupling, grid, q0, channels, options.coupling_phase);
        const double tail = sol.levels.back().total;
        if (options.truncation || tail < options.tail_tolerance)
            break;
        if (n >= options.max_truncation)
            throw ConvergenceError("boson ladder truncation did not converge: P_" + std::to_string(n)
                                   + " = " + fmt(tail) + " at the maximum truncation");
        n = std::min(options.max_truncation, n + 4);
        channels = ChannelSet::boson_ladder(omega_b, n);
        check_channel_distance(q0, channels, options.threshold_exclusion);
        grid = grid_for(options, q0, channels, coupling.impact_parameter);
    }
    record_history(sol);

    if (options.refine) {
        const MomentumGrid fine = refined_grid(grid, channels, options.refine_range_factor);
        const RecoilSolution ref = solve_ladder_blocks(coupling, fine, q0, channels, options.coupling_phase);
        double change = 0.0;
        for (std::size_t j = 0; j < sol.levels.size(); ++j)
            change = std::max(change, std::abs(ref.levels[j].total - sol.levels[j].total));
        sol.refined = true;
        sol.refinement_change = change;
        sol.eps_conv = std::max(sol.sum_deviation, change);
        sol.history.push_back({fine.size(), fine.range, fine.spacing, totals(ref)});
    }
    return sol;
}

CouplingModel recoil_coupling(const RecoilPoint& point, GridMode mode)
{
    if (!(point.rho > 0.0))
        throw InvalidInput("rho must be positive");
    if (!(point.p1lin > 0.0))
        throw InvalidInput("p1lin must be positive");
    if (!(point.energy_ratio > 1.0))
        throw InvalidInput("energy ratio must exceed 1 to normalize the coupling");
    const double q0 = std::sqrt(2.0 * point.energy_ratio);
    const double impact = point.rho * q0;
    const bool backward = mode == GridMode::SymmetricFull;
    const double a = normalize_amplitude(point.symmetry, impact, q0, 1.0, point.p1lin, backward);
    return CouplingModel(point.symmetry, impact, a, backward);
}

RecoilSolution recoil_two_level(const RecoilPoint& point, const RecoilOptions& options)
{
    if (!(point.energy_ratio > 0.0))
        throw InvalidInput("energy ratio must be positive");
    if (point.energy_ratio < 1.0)
        return trivial_solution(2);
    const CouplingModel model = recoil_coupling(point, options.grid.mode);
    return solve_two_level(model, std::sqrt(2.0 * point.energy_ratio), 1.0, options);
}

RecoilSolution recoil_boson(const RecoilPoint& point, const RecoilOptions& options)
{
    if (!(point.energy_ratio > 0.0))
        throw InvalidInput("energy ratio must be positive");
    if (point.energy_ratio < 1.0)
        return trivial_solution(options.truncation.value_or(8) + 1);
    const CouplingModel model = recoil_coupling(point, options.grid.mode);
    return solve_boson_ladder(model, std::sqrt(2.0 * point.energy_ratio), 1.0, options);
}

SpectralProfile::SpectralProfile(std::vector<ProfileNode> nodes) : nodes_(std::move(nodes))
{
    if (nodes_.empty())
        throw InvalidInput("spectral profile needs at least one node");
    for (const auto& n : nodes_) {
        if (!(n.weight >= 0.0) || !(n.modulus >= 0.0))
            throw InvalidInput("spectral profile weights and moduli must be non-negative");
        if (!(n.q > 0.0))
            throw InvalidInput("spectral profile nodes must be forward-propagating (q > 0)");
    }
}

SpectralProfile SpectralProfile::monochromatic(double q0)
{
    return SpectralProfile({{q0, 1.0, 1.0, 0.0}});
}

SpectralProfile SpectralProfile::gaussian(double q0, double sigma, std::size_t count)
{
    if (!(sigma > 0.0) || count < 2)
        throw InvalidInput("gaussian profile needs sigma > 0 and at least two nodes");
    std::vector<ProfileNode> nodes;
    const double width = 10.0 * sigma;
    const double dq = width / double(count - 1);
    double norm = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double q = q0 - 0.5 * width + double(i) * dq;
        const double w = (i == 0 || i + 1 == count) ? 0.5 * dq : dq;
        const double density = std::exp(-0.5 * std::pow((q - q0) / sigma, 2));
        nodes.push_back({q, w, std::sqrt(density), 0.0});
        norm += w * density;
    }
    const double scale = 1.0 / std::sqrt(norm);
    for (auto& n : nodes)
        n.modulus *= scale;
    return SpectralProfile(std::move(nodes));
}

double SpectralProfile::normalization() const noexcept
{
    double s = 0.0;
    for (const auto& n : nodes_)
        s += n.weight * n.modulus * n.modulus;
    return s;
}

SpectralProfile SpectralProfile::with_phases(const std::vector<double>& phases) const
{
    if (phases.size() != nodes_.size())
        throw InvalidInput("one phase per profile node is required");
    auto nodes = nodes_;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        nodes[i].phase = phases[i];
    return SpectralProfile(std::move(nodes));
}

std::vector<double> weighted_probability(const SpectralProfile& profile,
                                         const std::vector<std::vector<double>>& per_node)
{
    if (std::abs(profile.normalization() - 1.0) > 1e-6)
        throw InvalidInput("spectral profile is not normalized (integral "
                           + fmt(profile.normalization()) + ")");
    const auto& nodes = profile.nodes();
    if (per_node.size() != nodes.size())
        throw InvalidInput("one result per profile node is required");
    std::size_t levels = 0;
    for (const auto& r : per_node)
        levels = std::max(levels, r.size());
    std::vector<double> out(levels, 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double w = nodes[i].weight * nodes[i].modulus * nodes[i].modulus;
        for (std::size_t j = 0; j < per_node[i].size(); ++j)
            out[j] += w * per_node[i][j];
    }
    return out;
}

std::vector<double> weighted_probability(const SpectralProfile& profile,
                                         const std::function<std::vector<double>(double)>& solve_at)
{
    std::vector<std::vector<double>> per_node;
    for (const auto& n : profile.nodes())
        per_node.push_back(solve_at(n.q));
    return weighted_probability(profile, per_node);
}

} // namespace ekick
