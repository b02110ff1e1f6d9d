#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ekick {

using complex = std::complex<double>;

enum class Symmetry { px, pz, dz2, dxz, dx2y2 };

/// Angular character of a transition: the kernel in momentum space is
/// (sign q)^sigma |q|^l K_m(|q| R_e).
struct TransitionSymmetry {
    Symmetry name;
    int l;
    int m;
    int sigma;

    static TransitionSymmetry of(Symmetry s) noexcept;
    /// Accepts "p_x", "p_z", "d_z2", "d_xz", "d_x2y2" (also without underscore).
    static TransitionSymmetry parse(std::string_view name);

    std::string label() const;
    bool operator==(const TransitionSymmetry&) const = default;
};

/// All five symmetries that couple to a beam crossing the x axis.
std::vector<Symmetry> all_symmetries();

/// Electron-sample coupling with the multipole strength and every constant
/// prefactor folded into `amplitude`.
struct CouplingModel {
    TransitionSymmetry symmetry;
    double impact_parameter;
    double amplitude;
    bool backscatter_in_normalization = false;

    CouplingModel(TransitionSymmetry sym, double impact, double amp, bool backscatter = false);
};

/// q-independent coupling of the point-interaction limit.
struct PointLikeCoupling {
    double strength;

    explicit PointLikeCoupling(double g10);
};

/// Coupling for a wave-vector transfer q != 0. Real-valued: the i factors of
/// the odd rows are dropped since probabilities do not depend on the phase
/// of the 0->1 coupling.
double momentum_coupling(const CouplingModel& model, double q);

/// As momentum_coupling, but returns the analytic q -> 0 limit at q == 0
/// (finite for every supported symmetry since l >= m). Used by the recoil
/// matrices whose diagonal carries zero transfer.
double momentum_coupling_or_limit(const CouplingModel& model, double q);

/// Fourier transform of momentum_coupling, G(z) = int dq G_q e^{iqz}, in
/// closed form. Real for sigma = 0, imaginary for sigma = 1.
complex realspace_coupling(const CouplingModel& model, double z);
/// Continuation to complex z on the principal branch of (R_e^2 + z^2)^(1/2).
/// Analytic wherever the segment to the real axis avoids the branch points
/// +-i R_e, in particular on any vertical line Re z != 0.
complex realspace_coupling(const CouplingModel& model, complex z);

/// The (l, m) term of the spherical-harmonic expansion of the Coulomb
/// coupling per unit multipole moment Q_lm, without the -e/(pi hbar) factor.
/// Uses Condon-Shortley harmonics for Q_lm.
complex multipole_coupling(int l, int m, double q_transfer, double impact, double azimuth);

/// Amplitude A that makes the first-order probability equal `target_p1lin`
/// for an incident wave vector q0 with nonrelativistic recoil kinematics.
/// The backward term |G(-q1-q0)|^2 enters the normalization only when
/// `include_backscatter` is set.
double normalize_amplitude(const TransitionSymmetry& sym, double impact, double q0, double omega10,
                           double target_p1lin, bool include_backscatter);

/// Amplitude for the nonrecoil regime: A = (v / 2 pi) sqrt(P) / |kernel(omega10 / v)|.
double normalize_amplitude_nonrecoil(const TransitionSymmetry& sym, double impact, double velocity,
                                     double omega10, double target_p1lin);

/// Factor multiplying G_10 in the boson ladder: sqrt(j) for j' = j - 1,
/// sqrt(j+1) (with G_10 conjugated) for j' = j + 1, zero otherwise.
double ladder_factor(std::size_t j, std::size_t jp) noexcept;

/// Ladder element G_{jj'} built from a base 0->1 coupling value.
complex boson_ladder_coupling(std::size_t j, std::size_t jp, complex g10) noexcept;
complex boson_ladder_coupling(std::size_t j, std::size_t jp, const PointLikeCoupling& base) noexcept;

} // namespace ekick
