#pragma once

// Full recoil solution of the self-consistent scattering equation on a
// momentum grid (nonrelativistic kinematics, hbar = m_e = 1).

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "ekick/coupling.hpp"
#include "ekick/kinematics.hpp"

namespace ekick {

enum class GridMode {
    CenteredForward, ///< p_l = q0 + l h, all p_l > 0; forward scattering only
    SymmetricFull    ///< p_l = l h covering +-q_max; both scattering directions
};

/// Treatment of the open-channel poles in the propagator weights.
enum class PoleQuadrature {
    BinIntegrated, ///< exact bin integrals with M G frozen per bin; error O(h)
    Subtracted     ///< pole subtraction with interpolated residue; error O(h^2)
};

const char* to_string(PoleQuadrature q) noexcept;
PoleQuadrature parse_pole_quadrature(std::string_view name);

const char* to_string(GridMode mode) noexcept;
GridMode parse_grid_mode(std::string_view name);

enum class ChannelKind { TwoLevel, BosonLadder };

/// Sample levels seen by the electron: omega_j0 for j = 0..n (omega_00 = 0).
struct ChannelSet {
    ChannelKind kind;
    std::vector<double> frequencies;

    static ChannelSet two_level(double omega10);
    static ChannelSet boson_ladder(double omega_b, std::size_t truncation);

    std::size_t truncation() const noexcept { return frequencies.size() - 1; }
    double first_excitation() const noexcept { return frequencies[1]; }
    ChannelResult channel(std::size_t j, double q0) const;
};

struct MomentumGrid {
    double q0 = 0.0;
    double center = 0.0;
    double spacing = 0.0; ///< h
    double range = 0.0;   ///< (2N+1) h
    int half_count = 0;   ///< N
    GridMode mode = GridMode::CenteredForward;
    PoleQuadrature quadrature = PoleQuadrature::Subtracted;
    int edge_adjustments = 0; ///< how many times N was bumped to clear poles from bin edges
    bool range_clipped = false;

    std::size_t size() const noexcept { return std::size_t(2 * half_count + 1); }
    double point(std::size_t index) const noexcept
    {
        return center + (double(index) - half_count) * spacing;
    }
    std::vector<double> points() const;
};

/// q0 (1 - sqrt(1 - omega10/eps_q0)), the forward momentum transfer.
double forward_transfer(double q0, double omega10);

/// Grid with range c_delta * forward_transfer and 2N+1 points. In
/// CenteredForward mode the range is clipped so the lowest bin edge stays
/// at q >= 0. N is increased (at most 16 times) until every open-channel
/// pole +-|q_j| sits clear of the bin edges.
MomentumGrid build_grid(double q0, double omega10, double c_delta, int half_count, GridMode mode);
MomentumGrid build_grid(double q0, const ChannelSet& channels, double c_delta, int half_count, GridMode mode);

/// Default grid sizing. The range must cover the decay of the coupling
/// kernel (kernel_decay / R_e on each side) as well as c_delta times the
/// forward transfer, and the spacing must resolve the transfer itself.
struct GridPolicy {
    double c_delta = 6.0;
    double kernel_decay = 10.0;
    double spacing_fraction = 0.1;
    int min_points = 501;
    int max_points = 3001;
    GridMode mode = GridMode::CenteredForward;
    PoleQuadrature quadrature = PoleQuadrature::Subtracted;
};

MomentumGrid auto_grid(double q0, const ChannelSet& channels, double impact, const GridPolicy& policy);

/// Diagonal of Delta_j: bin integrals of 1/(eps_q - eps_q0 + omega_j0 - i0+).
std::vector<complex> delta_diagonal(const MomentumGrid& grid, double q0, double omega_j0);

/// Diagonal quadrature weights for integrals of f(q) / (eps_q - eps_q0 +
/// omega_j0 - i0+) over the grid, following grid.quadrature. The subtracted
/// form removes c f(s) / (q - s) at each open pole s inside the grid,
/// integrates it exactly and takes f(s) from cubic interpolation (or a
/// central difference when s is a grid point). Closed channels use the
/// bin integrals in both forms.
std::vector<complex> propagator_weights(const MomentumGrid& grid, double q0, double omega_j0);

struct RecoilOptions {
    GridPolicy grid;
    std::optional<int> points;     ///< overrides 2N+1
    std::optional<double> c_delta; ///< fixes range = c_delta * forward transfer
    bool refine = true;            ///< extra solve at 1.5x range for eps_conv
    double refine_range_factor = 1.5;
    complex coupling_phase{1.0, 0.0};
    double threshold_exclusion = 1e-4;
    double rcond_floor = 1e-14;
    std::optional<std::size_t> truncation; ///< boson ladder: fixed cut instead of adaptive growth
    double tail_tolerance = 1e-8;
    std::size_t max_truncation = 64;
};

struct LevelProbability {
    double total = 0.0;
    double forward = 0.0;
    double backward = 0.0;
};

struct GridRecord {
    std::size_t points;
    double range;
    double spacing;
    std::vector<double> probabilities;
};

struct RecoilSolution {
    std::vector<LevelProbability> levels; ///< j = 0..n
    std::vector<std::vector<complex>> coefficients; ///< M_j on the grid nodes
    MomentumGrid grid;
    double sum_deviation = 0.0;           ///< |sum_j P_j - 1|
    double refinement_change = 0.0;      ///< max_j |P_j(refined) - P_j|
    double eps_conv = 0.0;                ///< max of the two diagnostics above
    bool refined = false;
    double rcond = 1.0;
    double mean_occupation = 0.0;
    std::vector<GridRecord> history;
    bool solved = true;                   ///< false for trivially sub-threshold inputs

    double probability(std::size_t j) const { return j < levels.size() ? levels[j].total : 0.0; }
    std::size_t truncation() const noexcept { return levels.empty() ? 0 : levels.size() - 1; }
};

/// Two-level solve on a given grid via M_1 = (1 - S_10 S_01)^{-1} g_1.
RecoilSolution solve_two_level(const CouplingModel& coupling, const MomentumGrid& grid, double q0,
                               double omega10, complex phase = {1.0, 0.0});

/// Two-level solve with automatic grid and refinement diagnostics.
RecoilSolution solve_two_level(const CouplingModel& coupling, double q0, double omega10,
                               const RecoilOptions& options = {});

/// Ladder solve by block forward sweep / back substitution on a given grid
/// with a fixed truncation n. With n = 1 this is the two-level system.
RecoilSolution solve_ladder_blocks(const CouplingModel& coupling, const MomentumGrid& grid, double q0,
                                   const ChannelSet& channels, complex phase = {1.0, 0.0});

/// Boson ladder with adaptive truncation (grown until P_n < tail_tolerance).
RecoilSolution solve_boson_ladder(const CouplingModel& coupling, double q0, double omega_b,
                                  const RecoilOptions& options = {});

/// Dimensionless entry point: omega10 = 1, v = q0 = sqrt(2 energy_ratio),
/// R_e = rho v, amplitude normalized to `p1lin`. The normalization includes
/// the backward term only in SymmetricFull mode.
struct RecoilPoint {
    TransitionSymmetry symmetry;
    double rho;
    double p1lin;
    double energy_ratio;
};

CouplingModel recoil_coupling(const RecoilPoint& point, GridMode mode);
RecoilSolution recoil_two_level(const RecoilPoint& point, const RecoilOptions& options = {});
RecoilSolution recoil_boson(const RecoilPoint& point, const RecoilOptions& options = {});

/// Incident spectral density |alpha_q|^2 sampled on quadrature nodes. Each
/// node keeps modulus and phase separately; only the modulus enters.
struct ProfileNode {
    double q;
    double weight;
    double modulus;
    double phase = 0.0;
};

class SpectralProfile {
public:
    explicit SpectralProfile(std::vector<ProfileNode> nodes);

    static SpectralProfile monochromatic(double q0);
    /// Gaussian |alpha_q|^2 of standard deviation `sigma`, trapezoid nodes
    /// over +-5 sigma, normalized to 1.
    static SpectralProfile gaussian(double q0, double sigma, std::size_t count);

    const std::vector<ProfileNode>& nodes() const noexcept { return nodes_; }
    double normalization() const noexcept;
    SpectralProfile with_phases(const std::vector<double>& phases) const;

private:
    std::vector<ProfileNode> nodes_;
};

/// P_j = sum_i w_i |alpha_i|^2 P_{q_i, j}; `per_node[i][j]` is the
/// monochromatic result at node i. Rejects profiles off normalization by 1e-6.
std::vector<double> weighted_probability(const SpectralProfile& profile,
                                         const std::vector<std::vector<double>>& per_node);

std::vector<double> weighted_probability(const SpectralProfile& profile,
                                         const std::function<std::vector<double>(double)>& solve_at);

} // namespace ekick
