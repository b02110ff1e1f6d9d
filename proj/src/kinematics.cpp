#include "ekick/kinematics.hpp"

#include <cmath>
#include <string>

#include "ekick/error.hpp"

namespace ekick {

Kinematics Kinematics::relativistic(double speed_of_light)
{
    if (!(speed_of_light > 0.0) || !std::isfinite(speed_of_light))
        throw InvalidInput("speed of light must be positive and finite");
    return Kinematics{Dispersion::Relativistic, speed_of_light};
}

double Kinematics::energy(double q) const noexcept
{
    if (dispersion_ == Dispersion::Nonrelativistic)
        return 0.5 * q * q;
    // c*sqrt(c^2+q^2) - c^2, written without cancellation
    return c_ * q * q / (std::sqrt(c_ * c_ + q * q) + c_);
}

double Kinematics::group_velocity(double q) const noexcept
{
    if (dispersion_ == Dispersion::Nonrelativistic)
        return q;
    return c_ * q / std::sqrt(c_ * c_ + q * q);
}

ChannelResult Kinematics::scattered_wavevector(double q, double loss) const
{
    if (!(loss >= 0.0))
        throw InvalidInput("frequency loss must be non-negative, got " + std::to_string(loss));
    if (!(q > 0.0))
        throw InvalidInput("incident wave vector must be positive, got " + std::to_string(q));

    const double remaining = energy(q) - loss;
    if (remaining == 0.0)
        return {ChannelState::AtThreshold, 0.0};

    // q_j^2 such that energy(q_j) = remaining; negative for evanescent channels
    double q2;
    if (dispersion_ == Dispersion::Nonrelativistic) {
        q2 = 2.0 * remaining;
    } else {
        q2 = remaining * remaining / (c_ * c_) + 2.0 * remaining;
    }
    if (remaining > 0.0)
        return {ChannelState::Open, std::sqrt(q2)};
    return {ChannelState::Closed, std::sqrt(std::abs(q2))};
}

double Kinematics::threshold_wavevector(double loss) const
{
    if (!(loss >= 0.0))
        throw InvalidInput("frequency loss must be non-negative");
    if (dispersion_ == Dispersion::Nonrelativistic)
        return std::sqrt(2.0 * loss);
    return std::sqrt(loss * loss / (c_ * c_) + 2.0 * loss);
}

} // namespace ekick
