#pragma once

// Beam-electron kinematics in natural units (hbar = m_e = 1).
//
// Energies are measured from the rest energy in both variants, so a loss
// frequency means the same thing whichever dispersion is used.

namespace ekick {

enum class Dispersion { Nonrelativistic, Relativistic };

enum class ChannelState { Open, AtThreshold, Closed };

/// Outcome of an inelastic transition for a given incident wave vector.
/// For Open/AtThreshold channels `wavevector` is the final |q_j| (0 at
/// threshold); for Closed channels it is the evanescent magnitude kappa.
struct ChannelResult {
    ChannelState state;
    double wavevector;

    bool open() const noexcept { return state == ChannelState::Open; }
};

class Kinematics {
public:
    static Kinematics nonrelativistic() noexcept { return Kinematics{Dispersion::Nonrelativistic, 0.0}; }
    /// `speed_of_light` in natural units (137.036 for atomic units).
    static Kinematics relativistic(double speed_of_light);

    Dispersion dispersion() const noexcept { return dispersion_; }
    double speed_of_light() const noexcept { return c_; }

    double energy(double q) const noexcept;
    double group_velocity(double q) const noexcept;

    /// Final wave vector after losing `loss` (angular frequency) from q.
    ChannelResult scattered_wavevector(double q, double loss) const;

    /// Incident wave vector at which energy equals `loss`.
    double threshold_wavevector(double loss) const;

private:
    Kinematics(Dispersion d, double c) : dispersion_(d), c_(c) {}

    Dispersion dispersion_;
    double c_;
};

} // namespace ekick
