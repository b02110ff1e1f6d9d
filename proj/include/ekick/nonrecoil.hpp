#pragma once

// Nonrecoil regime: the electron is a classical source moving at constant
// velocity v along z and the sample amplitudes f_j(z) obey
//   df_j/dz = -(i/v) sum_j' G_jj'(z) exp(i w_jj' z / v) f_j'(z).

#include <cstddef>
#include <optional>
#include <vector>

#include "ekick/coupling.hpp"

namespace ekick {

enum class SystemKind { TwoLevel, BosonLadder, GeneralMultilevel };

/// G_{upper,lower}(z) = factor * realspace_coupling(models[model], z); the
/// reverse element is its complex conjugate.
struct CouplingTerm {
    std::size_t upper;
    std::size_t lower;
    std::size_t model;
    complex factor;
};

class LevelSystem {
public:
    LevelSystem(std::vector<double> frequencies, double velocity,
                SystemKind kind = SystemKind::GeneralMultilevel);

    static LevelSystem two_level(const CouplingModel& coupling, double omega10, double velocity,
                                 complex phase = {1.0, 0.0});
    static LevelSystem boson_ladder(const CouplingModel& coupling, double omega_b, std::size_t truncation,
                                    double velocity, complex phase = {1.0, 0.0});

    void add_coupling(std::size_t upper, std::size_t lower, const CouplingModel& model,
                      complex factor = {1.0, 0.0});

    std::size_t size() const noexcept { return frequencies_.size(); }
    const std::vector<double>& frequencies() const noexcept { return frequencies_; }
    double velocity() const noexcept { return velocity_; }
    SystemKind kind() const noexcept { return kind_; }
    const std::vector<CouplingModel>& models() const noexcept { return models_; }
    const std::vector<CouplingTerm>& terms() const noexcept { return terms_; }

    /// G_jj'(z) without the exp(i w_jj' z/v) factor.
    complex coupling(std::size_t j, std::size_t jp, double z) const;

    /// max(R_e over couplings, v / smallest nonzero transition frequency)
    double natural_length() const;

private:
    std::vector<double> frequencies_;
    double velocity_;
    SystemKind kind_;
    std::vector<CouplingModel> models_;
    std::vector<CouplingTerm> terms_;
};

class InitialState {
public:
    explicit InitialState(std::vector<complex> amplitudes);
    static InitialState basis(std::size_t levels, std::size_t index);
    static InitialState ground(std::size_t levels) { return basis(levels, 0); }

    const std::vector<complex>& amplitudes() const noexcept { return a_; }
    std::size_t size() const noexcept { return a_.size(); }
    /// index of the single occupied level, if the state is a basis state
    std::optional<std::size_t> pure_level() const;

private:
    std::vector<complex> a_;
};

struct IntegrationOptions {
    std::optional<double> half_range; ///< Z; default 100 * natural_length()
    double tolerance = 1e-11;         ///< absolute and relative per-step error
    std::size_t samples = 2001;       ///< uniform samples over [-Z, Z]; 0 keeps endpoints only
    bool tail_correction = true;      ///< first-order propagator for |z| > Z
    bool tail_check = true;           ///< compare against a run over [-2Z, 2Z]
    double tail_tolerance = 1e-6;     ///< accepted |P_j(Z) - P_j(2Z)|
    int max_doublings = 5;
    std::size_t max_steps = 200000;   ///< stepper budget between two samples, raised to 4x what the step cap forces
};

struct TrajectoryResult {
    std::vector<double> z;
    std::vector<std::vector<complex>> amplitudes; ///< amplitudes[k][j] = f_j(z_k)
    std::vector<complex> final_amplitudes;
    std::vector<double> probabilities;            ///< |f_j(Z)|^2
    double norm_drift = 0.0;                      ///< max_k |sum_j |f_j(z_k)|^2 - 1|
    double tail_estimate = 0.0;                   ///< max_j |P_j(Z) - P_j(2Z)|
    double half_range = 0.0;
    int doublings = 0;

    double probability(std::size_t j) const { return j < probabilities.size() ? probabilities[j] : 0.0; }
};

TrajectoryResult integrate(const LevelSystem& system, const InitialState& initial,
                           const IntegrationOptions& options = {});

/// 4 pi^2 / v^2 |G(omega10 / v)|^2
double linear_probability(const CouplingModel& coupling, double velocity, double omega10);

/// Dimensionless nonrecoil input: rho = omega10 R_e / v.
struct NonrecoilPoint {
    TransitionSymmetry symmetry;
    double rho;
    double p1lin;
    double velocity = 1.0;
    double omega10 = 1.0;
};

CouplingModel nonrecoil_coupling(const NonrecoilPoint& point);
LevelSystem nonrecoil_two_level(const NonrecoilPoint& point, complex phase = {1.0, 0.0});
TrajectoryResult nonrecoil_solve(const NonrecoilPoint& point, const IntegrationOptions& options = {});

struct CoherentTrajectory {
    std::vector<double> z;
    std::vector<complex> beta; ///< beta_0(z)
    std::vector<double> chi;   ///< global phase chi(z)
    complex beta_final;        ///< beta_0(+inf)
    double mean = 0.0;         ///< |beta_0(+inf)|^2

    std::vector<double> occupations(std::size_t n_max) const;
    std::vector<double> occupations_at(std::size_t sample, std::size_t n_max) const;
    /// f_j(z_k) = exp(i chi) exp(-|beta|^2/2) conj(beta)^j / sqrt(j!)
    std::vector<complex> amplitudes_at(std::size_t sample, std::size_t n_max) const;
};

/// Closed-form coherent-state solution for a boson driven by `coupling`.
/// beta_0(+inf) comes from Fourier quadrature of u(z) over the whole line;
/// beta_0 and chi at the samples from an ODE started at the first sample.
CoherentTrajectory boson_coherent(const CouplingModel& coupling, double omega_b, double velocity,
                                  const std::vector<double>& z_samples, complex phase = {1.0, 0.0});

/// Ladder size for which the Poisson tail beyond n is below `tail`.
std::size_t coherent_truncation(double mean, double tail = 1e-13);
/// Same, sized for the largest |beta_0(z)|^2 met along the trajectory
/// (strong couplings displace the state far beyond its final mean).
std::size_t coherent_truncation(const CoherentTrajectory& trajectory, double tail = 1e-13);

/// Boson ladder integrated as an ODE from the ground state. The truncation
/// starts at `initial_truncation` (or a Poisson estimate from the linear
/// probability) and doubles until the top level stays below `edge_tolerance`
/// along the whole trajectory.
struct LadderTrajectory {
    TrajectoryResult trajectory;
    std::size_t truncation = 0;
    double edge_population = 0.0; ///< max_z |f_n(z)|^2 at the final truncation
    double mean = 0.0;
};

LadderTrajectory boson_ladder_ode(const CouplingModel& coupling, double omega_b, double velocity,
                                  const IntegrationOptions& options = {},
                                  std::optional<std::size_t> initial_truncation = std::nullopt,
                                  double edge_tolerance = 1e-13, std::size_t max_truncation = 512);

struct SuperpositionResult {
    InitialState initial;
    std::vector<double> frequencies;
    /// final[i][j] = F_j,i: amplitude in level j at +Z when starting in level i
    std::vector<std::vector<complex>> final;
    std::vector<double> probabilities; ///< sum_i |F_ji a_i|^2
    double norm_drift = 0.0;
    double tail_estimate = 0.0;
};

/// Propagates each occupied basis level separately.
SuperpositionResult propagate_superposition(const LevelSystem& system, const InitialState& initial,
                                            const IntegrationOptions& options = {});

struct EelsLine {
    double frequency; ///< w_j - w_i (negative for gain)
    double weight;
};

/// Lines sorted by frequency; frequencies within merge_tolerance times the
/// largest transition frequency are merged.
std::vector<EelsLine> eels_spectrum(const SuperpositionResult& result, double merge_tolerance = 1e-9);
std::vector<EelsLine> eels_spectrum(const TrajectoryResult& result, const std::vector<double>& frequencies,
                                    std::size_t initial_level, double merge_tolerance = 1e-9);

} // namespace ekick
