#include "ekick/sweep.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "ekick/closed_forms.hpp"
#include "ekick/error.hpp"

namespace ekick {
namespace {

const char* const kInputColumns[] = {"rho", "p1lin", "energy_ratio"};

std::string g17(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::size_t input_index(const std::string& name)
{
    for (std::size_t i = 0; i < 3; ++i)
        if (name == kInputColumns[i])
            return i;
    throw InvalidInput("unknown sweep axis '" + name + "' (expected rho, p1lin or energy_ratio)");
}

void append_levels(std::vector<std::string>& cols, std::size_t levels)
{
    for (std::size_t j = 0; j <= levels; ++j)
        cols.push_back("p" + std::to_string(j));
}

void add(std::vector<std::string>& cols, std::initializer_list<const char*> names)
{
    for (const char* n : names)
        cols.emplace_back(n);
}

std::vector<double> padded(const std::vector<double>& p, std::size_t levels)
{
    std::vector<double> out(levels + 1, 0.0);
    for (std::size_t j = 0; j < std::min(p.size(), out.size()); ++j)
        out[j] = p[j];
    return out;
}

RecoilOptions recoil_options(const SweepSpec& spec)
{
    RecoilOptions o;
    o.grid.mode = spec.grid_mode;
    o.grid.quadrature = spec.pole_quadrature;
    o.points = spec.points;
    o.c_delta = spec.c_delta;
    o.refine = spec.refine;
    return o;
}

} // namespace

const char* to_string(SolverKind kind) noexcept
{
    switch (kind) {
    case SolverKind::Pointlike: return "pointlike";
    case SolverKind::Nonrecoil: return "nonrecoil";
    case SolverKind::Recoil: return "recoil";
    case SolverKind::BosonNonrecoil: return "boson-nonrecoil";
    case SolverKind::BosonRecoil: return "boson-recoil";
    }
    return "?";
}

SolverKind parse_solver(std::string_view name)
{
    for (auto k : {SolverKind::Pointlike, SolverKind::Nonrecoil, SolverKind::Recoil, SolverKind::BosonNonrecoil,
                   SolverKind::BosonRecoil})
        if (name == to_string(k))
            return k;
    throw InvalidInput("unknown solver '" + std::string(name) + "'");
}

const char* to_string(AxisScale scale) noexcept
{
    return scale == AxisScale::Linear ? "linear" : "log";
}

AxisScale parse_scale(std::string_view name)
{
    if (name == "linear")
        return AxisScale::Linear;
    if (name == "log")
        return AxisScale::Log;
    throw InvalidInput("unknown axis scale '" + std::string(name) + "'");
}

const char* to_string(BosonMethod method) noexcept
{
    return method == BosonMethod::Analytic ? "analytic" : "ode";
}

BosonMethod parse_boson_method(std::string_view name)
{
    if (name == "analytic" || name == "nonrecoil-analytic")
        return BosonMethod::Analytic;
    if (name == "ode" || name == "nonrecoil-ode")
        return BosonMethod::Ode;
    throw InvalidInput("unknown boson method '" + std::string(name) + "'");
}

std::vector<double> Axis::values() const
{
    if (count < 2)
        throw InvalidInput("axis '" + name + "': count must be at least 2");
    if (!(max > min))
        throw InvalidInput("axis '" + name + "': max must exceed min");
    if (scale == AxisScale::Log && !(min > 0.0))
        throw InvalidInput("axis '" + name + "': log scale requires min > 0");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = double(i) / double(count - 1);
        v[i] = scale == AxisScale::Linear ? min + t * (max - min)
                                          : std::exp(std::log(min) + t * (std::log(max) - std::log(min)));
    }
    v.front() = min;
    v.back() = max;
    return v;
}

void SweepSpec::validate() const
{
    std::array<bool, 3> seen{};
    for (const auto& a : axes) {
        const std::size_t i = input_index(a.name);
        if (seen[i])
            throw InvalidInput("axis '" + a.name + "' declared twice");
        seen[i] = true;
        (void)a.values();
    }
    if (!(rho > 0.0))
        throw InvalidInput("rho must be positive");
    if (!(p1lin >= 0.0))
        throw InvalidInput("p1lin must be non-negative");
    if (!(energy_ratio > 0.0))
        throw InvalidInput("energy_ratio must be positive");
    if (points && *points < 3)
        throw InvalidInput("points must be at least 3");
    if (c_delta && !(*c_delta > 0.0))
        throw InvalidInput("c_delta must be positive");
    if (!(convergence_tolerance > 0.0))
        throw InvalidInput("convergence_tolerance must be positive");
}

std::string SweepSpec::canonical() const
{
    std::ostringstream os;
    os << "solver=" << to_string(solver) << ";symmetry=" << symmetry.label() << ";rho=" << g17(rho)
       << ";p1lin=" << g17(p1lin) << ";energy_ratio=" << g17(energy_ratio) << ";grid_mode=" << to_string(grid_mode)
       << ";pole_quadrature=" << to_string(pole_quadrature)
       << ";points=" << (points ? std::to_string(*points) : "auto")
       << ";c_delta=" << (c_delta ? g17(*c_delta) : "auto") << ";refine=" << refine
       << ";boson_method=" << to_string(boson_method) << ";levels=" << levels
       << ";convergence_tolerance=" << g17(convergence_tolerance);
    for (const auto& a : axes)
        os << ";axis=" << a.name << ',' << g17(a.min) << ',' << g17(a.max) << ',' << a.count << ','
           << to_string(a.scale);
    return os.str();
}

std::size_t SweepResult::failures() const
{
    return std::size_t(std::count_if(records.begin(), records.end(), [](const SweepRecord& r) { return !r.error.empty(); }));
}

std::size_t default_workers()
{
    if (const char* env = std::getenv("EKICK_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1)
            return std::size_t(n);
        throw InvalidInput("EKICK_WORKERS must be a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string stable_hash(std::string_view text)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::string> sweep_columns(const SweepSpec& spec)
{
    std::vector<std::string> c;
    c.reserve(spec.levels + 16);
    for (const char* n : kInputColumns)
        c.emplace_back(n);
    switch (spec.solver) {
    case SolverKind::Pointlike:
        add(c, {"p1_with_backscatter", "p1_no_backscatter", "p1_boson_reference"});
        break;
    case SolverKind::Nonrecoil:
        add(c, {"p0", "p1", "norm_drift", "tail_estimate"});
        break;
    case SolverKind::Recoil:
        add(c, {"p0", "p1", "p1_forward", "p1_backward", "eps_conv", "sum_deviation", "grid_points"});
        break;
    case SolverKind::BosonNonrecoil:
        c.push_back("mean");
        append_levels(c, spec.levels);
        add(c, {"truncation", "norm_drift"});
        break;
    case SolverKind::BosonRecoil:
        c.push_back("mean");
        append_levels(c, spec.levels);
        add(c, {"truncation", "eps_conv", "grid_points"});
        break;
    }
    return c;
}

SweepRecord evaluate_point(const SweepSpec& spec, double rho, double p1lin, double energy_ratio)
{
    SweepRecord rec;
    rec.values = {rho, p1lin, energy_ratio};
    auto push = [&](std::initializer_list<double> v) { rec.values.insert(rec.values.end(), v); };
    const double tol = spec.convergence_tolerance;

    switch (spec.solver) {
    case SolverKind::Pointlike: {
        push({pointlike_with_backscatter(p1lin).p1, pointlike_no_backscatter(p1lin).p1, p1lin});
        break;
    }
    case SolverKind::Nonrecoil: {
        IntegrationOptions o;
        o.samples = 0;
        const auto r = nonrecoil_solve({spec.symmetry, rho, p1lin}, o);
        push({r.probability(0), r.probability(1), r.norm_drift, r.tail_estimate});
        rec.converged = r.norm_drift <= tol && r.tail_estimate <= o.tail_tolerance;
        break;
    }
    case SolverKind::Recoil: {
        const auto s = recoil_two_level({spec.symmetry, rho, p1lin, energy_ratio}, recoil_options(spec));
        push({s.probability(0), s.probability(1), s.levels[1].forward, s.levels[1].backward, s.eps_conv,
              s.sum_deviation, double(s.solved ? s.grid.size() : 0)});
        rec.converged = s.eps_conv <= tol;
        break;
    }
    case SolverKind::BosonNonrecoil: {
        const CouplingModel c = nonrecoil_coupling({spec.symmetry, rho, p1lin});
        if (spec.boson_method == BosonMethod::Analytic) {
            const auto co = boson_coherent(c, 1.0, 1.0, {});
            rec.values.push_back(co.mean);
            const auto p = co.occupations(spec.levels);
            rec.values.insert(rec.values.end(), p.begin(), p.end());
            push({double(spec.levels), 0.0});
        } else {
            IntegrationOptions o;
            o.samples = 0;
            const auto l = boson_ladder_ode(c, 1.0, 1.0, o);
            rec.values.push_back(l.mean);
            const auto p = padded(l.trajectory.probabilities, spec.levels);
            rec.values.insert(rec.values.end(), p.begin(), p.end());
            push({double(l.truncation), l.trajectory.norm_drift});
            rec.converged = l.trajectory.norm_drift <= tol;
        }
        break;
    }
    case SolverKind::BosonRecoil: {
        const auto s = recoil_boson({spec.symmetry, rho, p1lin, energy_ratio}, recoil_options(spec));
        std::vector<double> p;
        for (std::size_t j = 0; j < s.levels.size(); ++j)
            p.push_back(s.probability(j));
        rec.values.push_back(s.mean_occupation);
        const auto q = padded(p, spec.levels);
        rec.values.insert(rec.values.end(), q.begin(), q.end());
        push({double(s.truncation()), s.eps_conv, double(s.solved ? s.grid.size() : 0)});
        rec.converged = s.eps_conv <= tol;
        break;
    }
    }
    return rec;
}

SweepResult run_sweep(const SweepSpec& spec, std::optional<std::size_t> workers)
{
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    SweepResult result;
    result.spec = spec;
    result.columns = sweep_columns(spec);
    result.spec_hash = stable_hash(spec.canonical());

    std::vector<std::vector<double>> axis_values;
    std::size_t total = 1;
    for (const auto& a : spec.axes) {
        axis_values.push_back(a.values());
        total *= axis_values.back().size();
    }

    const std::size_t width = result.columns.size();
    result.records = parallel_map<SweepRecord>(total, workers.value_or(default_workers()), [&](std::size_t index) {
        std::array<double, 3> in{spec.rho, spec.p1lin, spec.energy_ratio};
        // row-major: the last declared axis varies fastest
        std::size_t rest = index;
        for (std::size_t k = spec.axes.size(); k-- > 0;) {
            const auto& v = axis_values[k];
            in[input_index(spec.axes[k].name)] = v[rest % v.size()];
            rest /= v.size();
        }
        try {
            SweepRecord r = evaluate_point(spec, in[0], in[1], in[2]);
            r.values.resize(width, 0.0);
            return r;
        } catch (const std::exception& e) {
            SweepRecord r;
            r.values = {in[0], in[1], in[2]};
            r.values.resize(width, std::nan(""));
            r.converged = false;
            r.error = e.what();
            return r;
        }
    });
    result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

namespace {

double clamp_to(double x, double lo, double hi)
{
    return std::min(hi, std::max(lo, x));
}

} // namespace

MaximumSearchResult find_maximum(const TransitionSymmetry& symmetry, const SearchBox& box,
                                 const IntegrationOptions& options, std::optional<std::size_t> workers)
{
    if (!(box.rho_max > box.rho_min) || !(box.p1lin_max > box.p1lin_min) || !(box.rho_min > 0.0)
        || !(box.p1lin_min > 0.0))
        throw InvalidInput("search box must be nonempty with positive lower bounds");
    if (box.rho_count < 2 || box.p1lin_count < 2)
        throw InvalidInput("search box needs at least 2x2 coarse points");
    if (!(box.step_tolerance > 0.0))
        throw InvalidInput("step tolerance must be positive");

    IntegrationOptions o = options;
    o.samples = 0;
    o.tail_check = false;
    MaximumSearchResult res;
    res.symmetry = symmetry;
    auto objective = [&](double rho, double p) {
        return nonrecoil_solve({symmetry, rho, p}, o).probability(1);
    };

    const Axis rho_axis{"rho", box.rho_min, box.rho_max, box.rho_count, box.rho_scale};
    const Axis p_axis{"p1lin", box.p1lin_min, box.p1lin_max, box.p1lin_count, AxisScale::Linear};
    const auto rv = rho_axis.values();
    const auto pv = p_axis.values();
    const auto coarse = parallel_map<double>(rv.size() * pv.size(), workers.value_or(default_workers()),
                                             [&](std::size_t i) {
                                                 try {
                                                     return objective(rv[i / pv.size()], pv[i % pv.size()]);
                                                 } catch (const std::exception&) {
                                                     return -1.0;
                                                 }
                                             });
    res.evaluations = coarse.size();
    const std::size_t best = std::size_t(std::max_element(coarse.begin(), coarse.end()) - coarse.begin());
    const std::size_t bi = best / pv.size();
    const std::size_t bj = best % pv.size();
    res.rho = rv[bi];
    res.p1lin = pv[bj];
    res.p1 = coarse[best];

    // compass search in (rho, p1lin) starting from one coarse cell
    double sr = bi + 1 < rv.size() ? rv[bi + 1] - rv[bi] : rv[bi] - rv[bi - 1];
    double sp = pv[1] - pv[0];
    res.trace.push_back({res.rho, res.p1lin, res.p1, sr, sp});
    while (sr >= box.step_tolerance || sp >= box.step_tolerance) {
        bool improved = false;
        const std::array<std::array<double, 2>, 4> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& d : dirs) {
            if ((d[0] != 0 && sr < box.step_tolerance) || (d[1] != 0 && sp < box.step_tolerance))
                continue;
            const double r = clamp_to(res.rho + d[0] * sr, box.rho_min, box.rho_max);
            const double p = clamp_to(res.p1lin + d[1] * sp, box.p1lin_min, box.p1lin_max);
            if (r == res.rho && p == res.p1lin)
                continue;
            double f = -1.0;
            try {
                f = objective(r, p);
            } catch (const std::exception&) {
            }
            ++res.evaluations;
            if (f > res.p1) {
                res.rho = r;
                res.p1lin = p;
                res.p1 = f;
                improved = true;
                break;
            }
        }
        if (!improved) {
            if (sr >= box.step_tolerance)
                sr *= 0.5;
            if (sp >= box.step_tolerance)
                sp *= 0.5;
        }
        res.trace.push_back({res.rho, res.p1lin, res.p1, sr, sp});
    }
    res.attained = res.p1 >= box.attainment;
    res.at_lower_rho_edge = res.rho <= box.rho_min * (1.0 + 1e-12);
    return res;
}

std::vector<FockPoint> fock_decomposition_sweep(const Axis& energy_ratio, double p1lin, double rho,
                                                const RecoilOptions& options, std::optional<std::size_t> workers)
{
    if (!(p1lin > 0.0) || !(rho > 0.0))
        throw InvalidInput("p1lin and rho must be positive");
    const auto ev = energy_ratio.values();
    return parallel_map<FockPoint>(ev.size(), workers.value_or(default_workers()), [&](std::size_t i) {
        FockPoint fp;
        fp.energy_ratio = ev[i];
        try {
            const CouplingModel c = nonrecoil_coupling({TransitionSymmetry::of(Symmetry::px), rho, p1lin});
            const auto co = boson_coherent(c, 1.0, 1.0, {});
            fp.nonrecoil_mean = co.mean;
            fp.nonrecoil_occupations = co.occupations(coherent_truncation(co.mean));
            const auto s = recoil_boson({TransitionSymmetry::of(Symmetry::px), rho, p1lin, ev[i]}, options);
            for (std::size_t j = 0; j < s.levels.size(); ++j)
                fp.occupations.push_back(s.probability(j));
            fp.mean = s.mean_occupation;
            fp.eps_conv = s.eps_conv;
        } catch (const std::exception& e) {
            fp.error = e.what();
        }
        return fp;
    });
}

} // namespace ekick
