#include "ekick/nonrecoil.hpp"

#include <algorithm>
#include <array>
#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "ekick/closed_forms.hpp"
#include "ekick/error.hpp"

namespace ekick {
namespace {

namespace odeint = boost::numeric::odeint;
using State = std::vector<complex>;

constexpr double pi = std::numbers::pi;
constexpr complex I{0.0, 1.0};

class AmplitudeRhs {
public:
    explicit AmplitudeRhs(const LevelSystem& s) : s_(&s), g_(s.models().size()) {}

    void operator()(const State& f, State& df, double z)
    {
        const LevelSystem& s = *s_;
        const auto& w = s.frequencies();
        for (std::size_t m = 0; m < g_.size(); ++m)
            g_[m] = realspace_coupling(s.models()[m], z);
        std::fill(df.begin(), df.end(), complex{});
        const double zv = z / s.velocity();
        for (const auto& t : s.terms()) {
            const complex c = t.factor * g_[t.model] * std::polar(1.0, (w[t.upper] - w[t.lower]) * zv);
            df[t.upper] += c * f[t.lower];
            df[t.lower] += std::conj(c) * f[t.upper];
        }
        const complex k = -I / s.velocity();
        for (auto& d : df)
            d *= k;
    }

private:
    const LevelSystem* s_;
    std::vector<complex> g_;
};

double norm2(const State& f)
{
    double n = 0.0;
    for (const auto& x : f)
        n += std::norm(x);
    return n;
}

// Step cap: a coupling peak of width R_e at z = 0 varies on the scale
// max(R_e, |z|), and the phase oscillates with period 2 pi v / w.
struct StepCap {
    double peak = std::numeric_limits<double>::infinity();
    double oscillation = std::numeric_limits<double>::infinity();

    explicit StepCap(const LevelSystem& s)
    {
        for (const auto& m : s.models())
            peak = std::min(peak, m.impact_parameter);
        for (const auto& t : s.terms()) {
            const double dw = std::abs(s.frequencies()[t.upper] - s.frequencies()[t.lower]);
            if (dw > 0.0)
                oscillation = std::min(oscillation, s.velocity() / dw);
        }
    }

    double at(double z) const { return 0.25 * std::min(oscillation, std::max(peak, 0.5 * std::abs(z))); }
};

Eigen::MatrixXcd tail_propagator(const LevelSystem& s, double z, bool right);
State apply_matrix(const Eigen::MatrixXcd& u, const State& f);

struct Run {
    std::vector<double> z;
    std::vector<State> f;
    State final;
    double drift = 0.0;
};

Run propagate(const LevelSystem& system, const State& start, double half_range, std::size_t samples,
              const IntegrationOptions& options)
{
    Run run;
    std::vector<double> times;
    if (samples >= 2) {
        times.resize(samples);
        for (std::size_t k = 0; k < samples; ++k)
            times[k] = -half_range + 2.0 * half_range * double(k) / double(samples - 1);
        times.back() = half_range;
    } else {
        times = {-half_range, half_range};
    }
    const bool keep = samples >= 2;
    const double n0 = norm2(start);

    State f = options.tail_correction ? apply_matrix(tail_propagator(system, half_range, false), start) : start;
    auto stepper = odeint::make_controlled(options.tolerance, options.tolerance,
                                           odeint::runge_kutta_fehlberg78<State>());
    AmplitudeRhs rhs(system);
    const StepCap cap(system);
    const double floor = 1e-6 * (std::isfinite(cap.oscillation) ? cap.oscillation : system.natural_length());
    double z = times.front();
    double dz = std::min(1e-3 * system.natural_length(), half_range / 100.0);
    auto record = [&](const State& x, double at) {
        run.drift = std::max(run.drift, std::abs(norm2(x) - n0));
        if (keep) {
            run.z.push_back(at);
            run.f.push_back(x);
        }
    };
    record(f, z);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double target = times[k];
        // the cap alone forces about interval / cap steps
        const double interval = target - z;
        const auto budget = std::max<double>(double(options.max_steps), 4.0 * interval / cap.at(0.0));
        std::size_t steps = 0;
        while (z < target) {
            if (double(++steps) > budget)
                throw ConvergenceError("amplitude integration exceeded its step budget of "
                                       + std::to_string(std::size_t(budget)) + " steps");
            const double remaining = target - z;
            double trial = std::min({dz, cap.at(z), remaining});
            const bool reaches = trial == remaining;
            if (stepper.try_step(std::ref(rhs), f, z, trial) == odeint::success) {
                if (reaches)
                    z = target;
                // a step shortened to land on a sample does not shrink the next one
                dz = reaches ? std::max(dz, trial) : trial;
            } else {
                dz = trial;
                if (dz < floor)
                    throw ConvergenceError("amplitude integration step fell below " + std::to_string(floor)
                                           + " at z = " + std::to_string(z));
            }
        }
        z = target;
        record(f, z);
    }
    run.final = options.tail_correction ? apply_matrix(tail_propagator(system, half_range, true), f) : f;
    return run;
}

double max_change(const State& a, const State& b)
{
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        d = std::max(d, std::abs(std::norm(a[j]) - std::norm(b[j])));
    return d;
}

// int_0^inf h(t) dt for h smooth and decaying. The double-exponential rule
// restarts from its coarsest row on every call, so results do not depend on
// what was integrated before.
complex ray_integral(const std::function<complex(double)>& h)
{
    thread_local boost::math::quadrature::exp_sinh<double> rule;
    const double re = rule.integrate([&](double t) { return h(t).real(); }, 1e-14);
    const double im = rule.integrate([&](double t) { return h(t).imag(); }, 1e-14);
    return {re, im};
}

// The couplings are analytic off the imaginary axis, so the oscillatory
// tails are moved onto vertical rays where exp(ikz) decays.

// int_a^inf G(x) exp(ikx) dx, a > 0
complex right_tail(const CouplingModel& m, double k, double a)
{
    if (k > 0.0)
        return I * std::polar(1.0, k * a)
               * ray_integral([&](double t) { return realspace_coupling(m, complex(a, t)) * std::exp(-k * t); });
    if (k < 0.0)
        return -I * std::polar(1.0, k * a)
               * ray_integral([&](double t) { return realspace_coupling(m, complex(a, -t)) * std::exp(k * t); });
    return ray_integral([&](double t) { return realspace_coupling(m, a + t); });
}

// int_{-inf}^{-a} G(x) exp(ikx) dx, a > 0
complex left_tail(const CouplingModel& m, double k, double a)
{
    if (k > 0.0)
        return -I * std::polar(1.0, -k * a)
               * ray_integral([&](double t) { return realspace_coupling(m, complex(-a, t)) * std::exp(-k * t); });
    if (k < 0.0)
        return I * std::polar(1.0, -k * a)
               * ray_integral([&](double t) { return realspace_coupling(m, complex(-a, -t)) * std::exp(k * t); });
    return ray_integral([&](double t) { return realspace_coupling(m, -a - t); });
}

// int_lo^hi G(x) exp(ikx) dx
complex segment_integral(const CouplingModel& m, double k, double lo, double hi)
{
    using rule = boost::math::quadrature::gauss_kronrod<double, 61>;
    auto f = [&](double x) { return realspace_coupling(m, x) * std::polar(1.0, k * x); };
    const double re = rule::integrate([&](double x) { return f(x).real(); }, lo, hi, 20, 1e-14);
    const double im = rule::integrate([&](double x) { return f(x).imag(); }, lo, hi, 20, 1e-14);
    return {re, im};
}

// int_{-inf}^{z0} G(x) exp(ikx) dx
complex integral_up_to(const CouplingModel& m, double k, double z0)
{
    const double r = m.impact_parameter;
    if (z0 <= -r)
        return left_tail(m, k, -z0);
    return left_tail(m, k, r) + segment_integral(m, k, -r, z0);
}

complex full_line_integral(const CouplingModel& m, double k)
{
    const double r = m.impact_parameter;
    return left_tail(m, k, r) + segment_integral(m, k, -r, r) + right_tail(m, k, r);
}

// exp(-i Omega) with Omega_jj' = (1/v) int G_jj'(z) exp(i w_jj' z/v) dz over
// the part of the line outside [-Z, Z] on one side: the first Magnus term of
// the propagator for the weak coupling tail.
Eigen::MatrixXcd tail_propagator(const LevelSystem& s, double z, bool right)
{
    const std::size_t n = s.size();
    Eigen::MatrixXcd omega = Eigen::MatrixXcd::Zero(Eigen::Index(n), Eigen::Index(n));
    const double v = s.velocity();
    std::map<std::pair<std::size_t, double>, complex> cache;
    for (const auto& t : s.terms()) {
        const double k = (s.frequencies()[t.upper] - s.frequencies()[t.lower]) / v;
        const auto key = std::make_pair(t.model, k);
        auto it = cache.find(key);
        if (it == cache.end()) {
            const CouplingModel& m = s.models()[t.model];
            complex value;
            value = right ? right_tail(m, k, z) : left_tail(m, k, z);
            it = cache.emplace(key, value).first;
        }
        const complex c = t.factor * it->second / v;
        omega(Eigen::Index(t.upper), Eigen::Index(t.lower)) += c;
        omega(Eigen::Index(t.lower), Eigen::Index(t.upper)) += std::conj(c);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(omega);
    const Eigen::VectorXcd phases = (complex(0.0, -1.0) * eig.eigenvalues().cast<complex>()).array().exp();
    return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

State apply_matrix(const Eigen::MatrixXcd& u, const State& f)
{
    const Eigen::VectorXcd x = u * Eigen::Map<const Eigen::VectorXcd>(f.data(), Eigen::Index(f.size()));
    return {x.data(), x.data() + x.size()};
}

} // namespace

LevelSystem::LevelSystem(std::vector<double> frequencies, double velocity, SystemKind kind)
    : frequencies_(std::move(frequencies)), velocity_(velocity), kind_(kind)
{
    if (frequencies_.size() < 2)
        throw InvalidInput("level system needs at least two levels");
    if (!(velocity > 0.0) || !std::isfinite(velocity))
        throw InvalidInput("electron velocity must be positive");
    for (double w : frequencies_)
        if (!std::isfinite(w))
            throw InvalidInput("level frequencies must be finite");
}

LevelSystem LevelSystem::two_level(const CouplingModel& coupling, double omega10, double velocity, complex phase)
{
    if (!(omega10 > 0.0))
        throw InvalidInput("transition frequency must be positive");
    LevelSystem s({0.0, omega10}, velocity, SystemKind::TwoLevel);
    s.add_coupling(1, 0, coupling, phase);
    return s;
}

LevelSystem LevelSystem::boson_ladder(const CouplingModel& coupling, double omega_b, std::size_t truncation,
                                      double velocity, complex phase)
{
    if (!(omega_b > 0.0))
        throw InvalidInput("boson frequency must be positive");
    if (truncation < 1)
        throw InvalidInput("boson truncation must be at least 1");
    std::vector<double> w(truncation + 1);
    for (std::size_t j = 0; j <= truncation; ++j)
        w[j] = double(j) * omega_b;
    LevelSystem s(std::move(w), velocity, SystemKind::BosonLadder);
    s.models_.push_back(coupling);
    for (std::size_t j = 1; j <= truncation; ++j)
        s.terms_.push_back({j, j - 1, 0, ladder_factor(j, j - 1) * phase});
    return s;
}

void LevelSystem::add_coupling(std::size_t upper, std::size_t lower, const CouplingModel& model, complex factor)
{
    if (upper >= size() || lower >= size() || upper == lower)
        throw InvalidInput("coupling term refers to invalid levels");
    std::size_t index = models_.size();
    for (std::size_t m = 0; m < models_.size(); ++m) {
        const auto& o = models_[m];
        if (o.symmetry.name == model.symmetry.name && o.impact_parameter == model.impact_parameter
            && o.amplitude == model.amplitude)
            index = m;
    }
    if (index == models_.size())
        models_.push_back(model);
    terms_.push_back({upper, lower, index, factor});
}

complex LevelSystem::coupling(std::size_t j, std::size_t jp, double z) const
{
    complex g{};
    for (const auto& t : terms_) {
        const complex c = t.factor * realspace_coupling(models_[t.model], z);
        if (t.upper == j && t.lower == jp)
            g += c;
        else if (t.upper == jp && t.lower == j)
            g += std::conj(c);
    }
    return g;
}

double LevelSystem::natural_length() const
{
    double len = 0.0;
    for (const auto& m : models_)
        len = std::max(len, m.impact_parameter);
    double wmin = std::numeric_limits<double>::infinity();
    for (const auto& t : terms_) {
        const double dw = std::abs(frequencies_[t.upper] - frequencies_[t.lower]);
        if (dw > 0.0)
            wmin = std::min(wmin, dw);
    }
    if (std::isfinite(wmin))
        len = std::max(len, velocity_ / wmin);
    if (!(len > 0.0))
        throw InvalidInput("level system has no length scale (no couplings)");
    return len;
}

InitialState::InitialState(std::vector<complex> amplitudes) : a_(std::move(amplitudes))
{
    if (a_.empty())
        throw InvalidInput("initial state is empty");
    double n = 0.0;
    for (const auto& x : a_)
        n += std::norm(x);
    if (std::abs(n - 1.0) > 1e-12)
        throw InvalidInput("initial state is not normalized (sum |a|^2 = " + std::to_string(n) + ")");
}

InitialState InitialState::basis(std::size_t levels, std::size_t index)
{
    if (index >= levels)
        throw InvalidInput("initial level out of range");
    std::vector<complex> a(levels);
    a[index] = 1.0;
    return InitialState(std::move(a));
}

std::optional<std::size_t> InitialState::pure_level() const
{
    std::optional<std::size_t> level;
    for (std::size_t j = 0; j < a_.size(); ++j) {
        if (a_[j] == complex{})
            continue;
        if (level)
            return std::nullopt;
        level = j;
    }
    return level;
}

TrajectoryResult integrate(const LevelSystem& system, const InitialState& initial, const IntegrationOptions& options)
{
    if (initial.size() != system.size())
        throw InvalidInput("initial state size does not match the level system");
    if (!(options.tolerance > 0.0))
        throw InvalidInput("integration tolerance must be positive");
    double z = options.half_range.value_or(100.0 * system.natural_length());
    if (!(z > 0.0) || !std::isfinite(z))
        throw InvalidInput("integration half-range must be positive");

    const State start = initial.amplitudes();
    Run base = propagate(system, start, z, options.samples, options);
    TrajectoryResult r;
    r.doublings = 0;
    if (options.tail_check) {
        for (;;) {
            const Run wide = propagate(system, start, 2.0 * z, 0, options);
            r.tail_estimate = max_change(base.final, wide.final);
            if (r.tail_estimate <= options.tail_tolerance)
                break;
            if (r.doublings >= options.max_doublings)
                throw ConvergenceError("integration domain did not converge: |P(Z) - P(2Z)| = "
                                       + std::to_string(r.tail_estimate) + " at Z = " + std::to_string(z));
            z *= 2.0;
            ++r.doublings;
            base = propagate(system, start, z, options.samples, options);
        }
    }
    r.z = std::move(base.z);
    r.amplitudes = std::move(base.f);
    r.final_amplitudes = base.final;
    r.norm_drift = base.drift;
    r.half_range = z;
    for (const auto& x : base.final)
        r.probabilities.push_back(std::norm(x));
    return r;
}

double linear_probability(const CouplingModel& coupling, double velocity, double omega10)
{
    if (!(velocity > 0.0) || !(omega10 > 0.0))
        throw InvalidInput("velocity and transition frequency must be positive");
    const double g = momentum_coupling(coupling, omega10 / velocity);
    return 4.0 * pi * pi * g * g / (velocity * velocity);
}

CouplingModel nonrecoil_coupling(const NonrecoilPoint& point)
{
    if (!(point.rho > 0.0))
        throw InvalidInput("rho must be positive");
    if (!(point.p1lin > 0.0))
        throw InvalidInput("p1lin must be positive");
    const double impact = point.rho * point.velocity / point.omega10;
    const double a = normalize_amplitude_nonrecoil(point.symmetry, impact, point.velocity, point.omega10, point.p1lin);
    return CouplingModel(point.symmetry, impact, a, false);
}

LevelSystem nonrecoil_two_level(const NonrecoilPoint& point, complex phase)
{
    return LevelSystem::two_level(nonrecoil_coupling(point), point.omega10, point.velocity, phase);
}

TrajectoryResult nonrecoil_solve(const NonrecoilPoint& point, const IntegrationOptions& options)
{
    const LevelSystem s = nonrecoil_two_level(point);
    return integrate(s, InitialState::ground(2), options);
}

std::vector<double> CoherentTrajectory::occupations(std::size_t n_max) const
{
    return poisson_occupations(mean, n_max);
}

std::vector<double> CoherentTrajectory::occupations_at(std::size_t sample, std::size_t n_max) const
{
    return poisson_occupations(std::norm(beta.at(sample)), n_max);
}

std::vector<complex> CoherentTrajectory::amplitudes_at(std::size_t sample, std::size_t n_max) const
{
    const complex b = std::conj(beta.at(sample));
    std::vector<complex> f(n_max + 1);
    complex term = std::polar(std::exp(-0.5 * std::norm(b)), chi.at(sample));
    for (std::size_t j = 0; j <= n_max; ++j) {
        if (j > 0)
            term *= b / std::sqrt(double(j));
        f[j] = term;
    }
    return f;
}

CoherentTrajectory boson_coherent(const CouplingModel& coupling, double omega_b, double velocity,
                                  const std::vector<double>& z_samples, complex phase)
{
    if (!(omega_b > 0.0) || !(velocity > 0.0))
        throw InvalidInput("boson frequency and velocity must be positive");
    if (!std::is_sorted(z_samples.begin(), z_samples.end()))
        throw InvalidInput("z samples must be increasing");
    const double k = omega_b / velocity;
    auto g = [&](double z) { return phase * realspace_coupling(coupling, z); };

    CoherentTrajectory c;
    // beta(+inf) = (i/v) conj( int G(z) exp(ikz) dz )
    c.beta_final = I / velocity * std::conj(phase * full_line_integral(coupling, k));
    c.mean = std::norm(c.beta_final);

    if (z_samples.empty())
        return c;

    // beta(z0) = int_{-inf}^{z0} u,  u(z) = (i/v) conj(G(z)) exp(-ikz)
    const double z0 = z_samples.front();
    const complex beta0 = I / velocity * std::conj(phase * integral_up_to(coupling, k, z0));

    using Y = std::array<double, 3>; // Re beta, Im beta, chi
    Y y{beta0.real(), beta0.imag(), 0.0};
    auto rhs = [&](const Y& s, Y& ds, double z) {
        const complex gz = g(z);
        const complex u = I / velocity * std::conj(gz) * std::polar(1.0, -k * z);
        const complex lam = gz * std::polar(1.0, k * z);
        const complex b(s[0], s[1]);
        ds[0] = u.real();
        ds[1] = u.imag();
        ds[2] = -(lam * b).real() / velocity;
    };
    auto stepper = odeint::make_dense_output(1e-12, 1e-12, odeint::runge_kutta_dopri5<Y>());
    std::vector<double> times = z_samples;
    if (times.size() == 1)
        times.push_back(times.front());
    const double span = std::max(times.back() - times.front(), 1e-12);
    try {
        odeint::integrate_times(stepper, rhs, y, times.begin(), times.end(), span * 1e-4,
                                [&](const Y& s, double z) {
                                    if (c.z.size() < z_samples.size()) {
                                        c.z.push_back(z);
                                        c.beta.emplace_back(s[0], s[1]);
                                        c.chi.push_back(s[2]);
                                    }
                                },
                                odeint::max_step_checker(200000));
    } catch (const std::runtime_error& e) {
        throw ConvergenceError(std::string("coherent-state integration failed: ") + e.what());
    }
    return c;
}

std::size_t coherent_truncation(double mean, double tail)
{
    const auto p = poisson_occupations(mean, tail);
    return std::max<std::size_t>(p.size() + 2, 4);
}

std::size_t coherent_truncation(const CoherentTrajectory& trajectory, double tail)
{
    double peak = trajectory.mean;
    for (const auto& b : trajectory.beta)
        peak = std::max(peak, std::norm(b));
    return coherent_truncation(peak, tail);
}

LadderTrajectory boson_ladder_ode(const CouplingModel& coupling, double omega_b, double velocity,
                                  const IntegrationOptions& options, std::optional<std::size_t> initial_truncation,
                                  double edge_tolerance, std::size_t max_truncation)
{
    std::size_t n = initial_truncation.value_or(
        coherent_truncation(linear_probability(coupling, velocity, omega_b)));
    IntegrationOptions o = options;
    if (o.samples < 201)
        o.samples = 201;
    for (;;) {
        const LevelSystem system = LevelSystem::boson_ladder(coupling, omega_b, n, velocity);
        LadderTrajectory out;
        out.trajectory = integrate(system, InitialState::ground(n + 1), o);
        for (const auto& f : out.trajectory.amplitudes)
            out.edge_population = std::max(out.edge_population, std::norm(f[n]));
        out.edge_population = std::max(out.edge_population, out.trajectory.probabilities[n]);
        if (out.edge_population <= edge_tolerance) {
            out.truncation = n;
            for (std::size_t j = 0; j <= n; ++j)
                out.mean += double(j) * out.trajectory.probabilities[j];
            if (options.samples < 2) {
                out.trajectory.z.clear();
                out.trajectory.amplitudes.clear();
            }
            return out;
        }
        if (n >= max_truncation)
            throw ConvergenceError("boson ladder truncation did not converge: top level population "
                                   + std::to_string(out.edge_population) + " at n = " + std::to_string(n));
        n = std::min(max_truncation, 2 * n);
    }
}

SuperpositionResult propagate_superposition(const LevelSystem& system, const InitialState& initial,
                                            const IntegrationOptions& options)
{
    if (initial.size() != system.size())
        throw InvalidInput("initial state size does not match the level system");
    SuperpositionResult r{initial, system.frequencies(), {}, std::vector<double>(system.size(), 0.0), 0.0, 0.0};
    IntegrationOptions o = options;
    o.samples = 0;
    r.final.assign(system.size(), {});
    for (std::size_t i = 0; i < system.size(); ++i) {
        const complex a = initial.amplitudes()[i];
        if (a == complex{})
            continue;
        const TrajectoryResult t = integrate(system, InitialState::basis(system.size(), i), o);
        r.final[i] = t.final_amplitudes;
        r.norm_drift = std::max(r.norm_drift, t.norm_drift);
        r.tail_estimate = std::max(r.tail_estimate, t.tail_estimate);
        for (std::size_t j = 0; j < system.size(); ++j)
            r.probabilities[j] += std::norm(t.final_amplitudes[j] * a);
    }
    return r;
}

namespace {

std::vector<EelsLine> merge_lines(std::vector<EelsLine> lines, double scale, double tolerance)
{
    std::stable_sort(lines.begin(), lines.end(),
                     [](const EelsLine& a, const EelsLine& b) { return a.frequency < b.frequency; });
    std::vector<EelsLine> out;
    const double tol = tolerance * (scale > 0.0 ? scale : 1.0);
    for (const auto& l : lines) {
        if (!out.empty() && std::abs(l.frequency - out.back().frequency) <= tol)
            out.back().weight += l.weight;
        else
            out.push_back(l);
    }
    return out;
}

double frequency_scale(const std::vector<double>& w)
{
    double s = 0.0;
    for (double a : w)
        for (double b : w)
            s = std::max(s, std::abs(a - b));
    return s;
}

} // namespace

std::vector<EelsLine> eels_spectrum(const SuperpositionResult& result, double merge_tolerance)
{
    std::vector<EelsLine> lines;
    const auto& w = result.frequencies;
    for (std::size_t i = 0; i < result.final.size(); ++i) {
        const complex a = result.initial.amplitudes()[i];
        if (result.final[i].empty())
            continue;
        for (std::size_t j = 0; j < w.size(); ++j)
            lines.push_back({w[j] - w[i], std::norm(result.final[i][j] * a)});
    }
    return merge_lines(std::move(lines), frequency_scale(w), merge_tolerance);
}

std::vector<EelsLine> eels_spectrum(const TrajectoryResult& result, const std::vector<double>& frequencies,
                                    std::size_t initial_level, double merge_tolerance)
{
    if (initial_level >= frequencies.size() || result.probabilities.size() != frequencies.size())
        throw InvalidInput("trajectory and level frequencies do not match");
    std::vector<EelsLine> lines;
    for (std::size_t j = 0; j < frequencies.size(); ++j)
        lines.push_back({frequencies[j] - frequencies[initial_level], result.probabilities[j]});
    return merge_lines(std::move(lines), frequency_scale(frequencies), merge_tolerance);
}

} // namespace ekick
