#include "ekick/cli.hpp"

#include <CLI11.hpp>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "ekick/closed_forms.hpp"
#include "ekick/error.hpp"
#include "ekick/nonrecoil.hpp"
#include "ekick/recoil.hpp"
#include "ekick/sweep.hpp"

namespace ekick::cli {
namespace {

using ojson = nlohmann::ordered_json;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string g17(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"')
            q += '"';
        q += c;
    }
    return q + '"';
}

std::string cell_text(const Cell& c)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>)
                return g17(v);
            else if constexpr (std::is_same_v<T, long long>)
                return std::to_string(v);
            else if constexpr (std::is_same_v<T, bool>)
                return v ? "true" : "false";
            else
                return csv_field(v);
        },
        c);
}

ojson cell_json(const Cell& c)
{
    return std::visit(
        [](const auto& v) -> ojson {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                if (!std::isfinite(v))
                    return nullptr;
                return v;
            } else {
                return v;
            }
        },
        c);
}

Axis parse_axis(const std::string& text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');)
        parts.push_back(p);
    if (parts.size() != 4 && parts.size() != 5)
        throw InvalidInput("axes: expected name:min:max:count[:scale], got '" + text + "'");
    Axis a;
    try {
        a.name = parts[0];
        a.min = std::stod(parts[1]);
        a.max = std::stod(parts[2]);
        a.count = std::size_t(std::stoul(parts[3]));
    } catch (const std::exception&) {
        throw InvalidInput("axes: malformed number in '" + text + "'");
    }
    if (parts.size() == 5)
        a.scale = parse_scale(parts[4]);
    return a;
}

std::vector<std::complex<double>> parse_initial(const std::string& text)
{
    std::vector<std::complex<double>> out;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) {
        try {
            const auto colon = p.find(':');
            if (colon == std::string::npos)
                out.emplace_back(std::stod(p), 0.0);
            else
                out.emplace_back(std::stod(p.substr(0, colon)), std::stod(p.substr(colon + 1)));
        } catch (const std::exception&) {
            throw InvalidInput("initial: malformed amplitude '" + p + "'");
        }
    }
    return out;
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& field)
{
    if (!j.contains(key))
        return;
    try {
        if constexpr (std::is_same_v<T, std::size_t>) {
            const auto& v = j.at(key);
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw InvalidInput(std::string(key) + ": expected a non-negative integer");
            field = v.get<std::size_t>();
        } else {
            field = j.at(key).get<T>();
        }
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput(std::string(key) + ": wrong type in configuration");
    }
}

template <class T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& field)
{
    if (!j.contains(key))
        return;
    if (j.at(key).is_null()) {
        field.reset();
        return;
    }
    T v{};
    read_key(j, key, v);
    field = v;
}

void require(bool ok, const std::string& field, const std::string& what)
{
    if (!ok)
        throw InvalidInput(field + ": " + what);
}

bool finite_positive(double x)
{
    return x > 0.0 && std::isfinite(x);
}

Format resolve_format(const RunConfig& c)
{
    if (c.format == "auto")
        return (c.command == "pointlike" || c.command == "sweep") ? Format::Csv : Format::Json;
    return parse_format(c.format);
}

ojson base_metadata(const RunConfig& c)
{
    ojson m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["command"] = c.command;
    m["config"] = to_json(c);
    m["units"] = "hbar = m_e = 1; frequencies in units of omega10 (or omega_b)";
    m["relativistic_energy_offset"] = "rest energy c^2 subtracted";
    return m;
}

std::vector<TransitionSymmetry> symmetries_for(const std::string& s)
{
    if (s == "all") {
        std::vector<TransitionSymmetry> out;
        for (auto sym : all_symmetries())
            out.push_back(TransitionSymmetry::of(sym));
        return out;
    }
    return {TransitionSymmetry::parse(s)};
}

RecoilOptions recoil_options(const RunConfig& c)
{
    RecoilOptions o;
    o.grid.mode = parse_grid_mode(c.grid_mode);
    o.grid.quadrature = parse_pole_quadrature(c.pole_quadrature);
    o.points = c.grid_points;
    o.c_delta = c.c_delta;
    o.refine = c.refine;
    if (c.truncation > 0)
        o.truncation = c.truncation;
    return o;
}

// ---- subcommands -----------------------------------------------------------

struct Outcome {
    Table table;
    bool converged = true;
    std::string diagnostics;
};

Outcome cmd_pointlike(const RunConfig& c)
{
    Outcome o;
    o.table.columns = {"p1lin", "p1_with_backscatter", "p1_no_backscatter", "p1_boson_reference"};
    for (std::size_t i = 0; i < c.points; ++i) {
        const double p = c.points == 1 ? c.p1lin_min
                                       : c.p1lin_min + (c.p1lin_max - c.p1lin_min) * double(i) / double(c.points - 1);
        o.table.rows.push_back(
            {p, pointlike_with_backscatter(p).p1, pointlike_no_backscatter(p).p1, p});
    }
    o.table.metadata = base_metadata(c);
    return o;
}

void write_trajectory(const RunConfig& c, const TrajectoryResult& r, std::ostream& out)
{
    Table t;
    t.columns = {"z_over_v_omega", "re_f0", "im_f0", "re_f1", "im_f1", "p1_of_z"};
    const double scale = c.omega10 / c.velocity;
    for (std::size_t k = 0; k < r.z.size(); ++k) {
        const auto& f = r.amplitudes[k];
        t.rows.push_back({r.z[k] * scale, f[0].real(), f[0].imag(), f[1].real(), f[1].imag(), std::norm(f[1])});
    }
    t.metadata = base_metadata(c);
    t.metadata["kind"] = "trajectory";
    t.metadata["half_range"] = r.half_range;
    t.metadata["norm_drift"] = r.norm_drift;
    write_output(t, Format::Csv, c.trajectory, out);
}

Outcome cmd_nonrecoil(const RunConfig& c, std::ostream& out)
{
    const NonrecoilPoint pt{TransitionSymmetry::parse(c.symmetry), c.rho, c.p1lin, c.velocity, c.omega10};
    IntegrationOptions io;
    io.tolerance = c.tolerance;
    io.samples = c.trajectory.empty() ? 0 : c.samples;
    const CouplingModel model = nonrecoil_coupling(pt);
    const TrajectoryResult r = nonrecoil_solve(pt, io);
    if (!c.trajectory.empty())
        write_trajectory(c, r, out);

    Outcome o;
    o.converged = r.norm_drift <= 1e-8;
    o.table.columns = {"symmetry", "rho", "p1lin", "velocity", "omega10", "impact_parameter", "amplitude",
                       "p0", "p1", "norm_drift", "tail_estimate", "half_range", "converged"};
    o.table.rows.push_back({pt.symmetry.label(), c.rho, c.p1lin, c.velocity, c.omega10, model.impact_parameter,
                            model.amplitude, r.probability(0), r.probability(1), r.norm_drift, r.tail_estimate,
                            r.half_range, o.converged});
    o.table.metadata = base_metadata(c);
    if (!o.converged)
        o.diagnostics = "norm drift " + g17(r.norm_drift) + " exceeds 1e-8";
    return o;
}

ojson history_json(const RecoilSolution& s)
{
    ojson h = ojson::array();
    for (const auto& g : s.history)
        h.push_back({{"points", g.points}, {"range", g.range}, {"spacing", g.spacing}, {"probabilities", g.probabilities}});
    return h;
}

Outcome cmd_recoil(const RunConfig& c)
{
    const RecoilPoint pt{TransitionSymmetry::parse(c.symmetry), c.rho, c.p1lin, c.energy_ratio};
    const RecoilSolution s = recoil_two_level(pt, recoil_options(c));
    Outcome o;
    o.converged = s.eps_conv <= c.convergence_tolerance;
    o.table.columns = {"symmetry", "rho", "p1lin", "energy_ratio", "grid_mode", "pole_quadrature", "p0", "p1", "p0_forward",
                       "p0_backward", "p1_forward", "p1_backward", "eps_conv", "sum_deviation", "refinement_change",
                       "rcond", "grid_points", "grid_range", "grid_spacing", "grid_half_count", "edge_adjustments",
                       "range_clipped", "solved", "converged"};
    const auto& g = s.grid;
    o.table.rows.push_back({pt.symmetry.label(), c.rho, c.p1lin, c.energy_ratio, c.grid_mode, c.pole_quadrature, s.probability(0),
                            s.probability(1), s.levels[0].forward, s.levels[0].backward, s.levels[1].forward,
                            s.levels[1].backward, s.eps_conv, s.sum_deviation, s.refinement_change, s.rcond,
                            (long long)(s.solved ? g.size() : 0), g.range, g.spacing, (long long)g.half_count,
                            (long long)g.edge_adjustments, g.range_clipped, s.solved, o.converged});
    o.table.metadata = base_metadata(c);
    o.table.metadata["history"] = history_json(s);
    if (!o.converged)
        o.diagnostics = "eps_conv " + g17(s.eps_conv) + " exceeds convergence_tolerance " + g17(c.convergence_tolerance);
    return o;
}

Outcome cmd_boson(const RunConfig& c)
{
    const TransitionSymmetry sym = TransitionSymmetry::parse(c.symmetry);
    std::vector<double> p;
    double mean = 0.0;
    Outcome o;
    o.table.metadata = base_metadata(c);
    if (c.method == "recoil") {
        const RecoilSolution s = recoil_boson({sym, c.rho, c.p1lin, c.energy_ratio}, recoil_options(c));
        for (std::size_t j = 0; j < s.levels.size(); ++j)
            p.push_back(s.probability(j));
        mean = s.mean_occupation;
        o.converged = s.eps_conv <= c.convergence_tolerance;
        o.table.metadata["eps_conv"] = s.eps_conv;
        o.table.metadata["sum_deviation"] = s.sum_deviation;
        o.table.metadata["grid_points"] = s.solved ? s.grid.size() : 0;
        o.table.metadata["history"] = history_json(s);
        if (!o.converged)
            o.diagnostics = "eps_conv " + g17(s.eps_conv) + " exceeds convergence_tolerance";
    } else {
        const CouplingModel model = nonrecoil_coupling({sym, c.rho, c.p1lin, c.velocity, c.omega10});
        if (c.method == "nonrecoil-analytic") {
            const auto co = boson_coherent(model, c.omega10, c.velocity, {});
            mean = co.mean;
            p = co.occupations(c.truncation > 0 ? c.truncation : std::max(c.levels, coherent_truncation(co.mean)));
        } else {
            IntegrationOptions io;
            io.tolerance = c.tolerance;
            io.samples = 0;
            std::optional<std::size_t> n;
            if (c.truncation > 0)
                n = c.truncation;
            const auto l = boson_ladder_ode(model, c.omega10, c.velocity, io, n);
            p = l.trajectory.probabilities;
            mean = l.mean;
            o.converged = l.trajectory.norm_drift <= 1e-8;
            o.table.metadata["norm_drift"] = l.trajectory.norm_drift;
            o.table.metadata["edge_population"] = l.edge_population;
            if (!o.converged)
                o.diagnostics = "norm drift " + g17(l.trajectory.norm_drift) + " exceeds 1e-8";
        }
    }
    o.table.metadata["mean"] = mean;
    o.table.metadata["truncation"] = p.empty() ? 0 : p.size() - 1;
    o.table.columns = {"method", "symmetry", "rho", "p1lin", "energy_ratio", "n", "probability", "mean", "converged"};
    for (std::size_t j = 0; j < p.size(); ++j)
        o.table.rows.push_back({c.method, sym.label(), c.rho, c.p1lin, c.energy_ratio, (long long)j, p[j], mean,
                                o.converged});
    return o;
}

SweepSpec sweep_spec(const RunConfig& c, const TransitionSymmetry& sym)
{
    SweepSpec s;
    s.solver = parse_solver(c.solver);
    s.axes = c.axes;
    s.symmetry = sym;
    s.rho = c.rho;
    s.p1lin = c.p1lin;
    s.energy_ratio = c.energy_ratio;
    s.grid_mode = parse_grid_mode(c.grid_mode);
    s.pole_quadrature = parse_pole_quadrature(c.pole_quadrature);
    s.points = c.grid_points;
    s.c_delta = c.c_delta;
    s.refine = c.refine;
    s.boson_method = c.method == "recoil" ? BosonMethod::Analytic : parse_boson_method(c.method);
    s.levels = c.levels;
    s.convergence_tolerance = c.convergence_tolerance;
    return s;
}

Table sweep_table(const RunConfig& c, const SweepResult& r)
{
    Table t;
    t.columns.push_back("symmetry");
    t.columns.insert(t.columns.end(), r.columns.begin(), r.columns.end());
    t.columns.push_back("converged");
    t.columns.push_back("error");
    ojson failures = ojson::array();
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto& rec = r.records[i];
        if (!rec.error.empty()) {
            failures.push_back({{"index", i}, {"reason", rec.error}});
            continue;
        }
        std::vector<Cell> row{r.spec.symmetry.label()};
        for (double v : rec.values)
            row.emplace_back(v);
        row.emplace_back(rec.converged);
        row.emplace_back(rec.error);
        t.rows.push_back(std::move(row));
    }
    t.metadata = base_metadata(c);
    t.metadata["symmetry"] = r.spec.symmetry.label();
    t.metadata["spec"] = r.spec.canonical();
    t.metadata["spec_hash"] = r.spec_hash;
    t.metadata["records"] = r.records.size();
    t.metadata["failures"] = failures;
    return t;
}

std::string with_symmetry(const RunConfig& c, const TransitionSymmetry& sym, Format f)
{
    std::string dir = c.output;
    if (!dir.empty() && dir.back() != '/')
        dir += '/';
    return dir + c.name + "_" + sym.label() + (f == Format::Csv ? ".csv" : ".json");
}

int cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err)
{
    const Format f = resolve_format(c);
    const auto syms = symmetries_for(c.symmetry);
    const bool per_symmetry = c.symmetry == "all";
    if (per_symmetry && (c.output.empty() || c.output == "-"))
        throw InvalidInput("output: symmetry 'all' writes one file per symmetry and needs an output directory");
    std::vector<SweepSpec> specs;
    for (const auto& sym : syms) {
        specs.push_back(sweep_spec(c, sym));
        specs.back().validate();
    }
    for (const auto& spec : specs) {
        const SweepResult r = run_sweep(spec);
        const Table t = sweep_table(c, r);
        write_output(t, f, per_symmetry ? with_symmetry(c, spec.symmetry, f) : c.output, out);
        if (r.failures() > 0)
            err << "sweep " << spec.symmetry.label() << ": " << r.failures() << " of " << r.records.size()
                << " points failed (see metadata)\n";
    }
    return 0;
}

Outcome cmd_find_max(const RunConfig& c)
{
    SearchBox box;
    box.rho_min = c.rho_min;
    box.rho_max = c.rho_max;
    box.p1lin_min = c.search_p1lin_min;
    box.p1lin_max = c.search_p1lin_max;
    box.rho_count = c.rho_count;
    box.p1lin_count = c.p1lin_count;
    box.rho_scale = parse_scale(c.rho_scale);
    box.step_tolerance = c.step_tolerance;
    IntegrationOptions io;
    io.tolerance = c.tolerance;

    Outcome o;
    o.table.columns = {"symmetry", "rho_star", "p1lin_star", "p1_max", "attained", "at_lower_rho_edge",
                       "evaluations", "rho_min", "rho_max", "p1lin_min", "p1lin_max"};
    o.table.metadata = base_metadata(c);
    ojson traces = ojson::object();
    for (const auto& sym : symmetries_for(c.symmetry)) {
        const auto r = find_maximum(sym, box, io);
        o.table.rows.push_back({sym.label(), r.rho, r.p1lin, r.p1, r.attained, r.at_lower_rho_edge,
                                (long long)r.evaluations, box.rho_min, box.rho_max, box.p1lin_min, box.p1lin_max});
        ojson tr = ojson::array();
        for (const auto& s : r.trace)
            tr.push_back({s.rho, s.p1lin, s.p1, s.rho_step, s.p1lin_step});
        traces[sym.label()] = tr;
        if (!r.attained) {
            o.converged = false;
            o.diagnostics += sym.label() + ": maximum P1 " + g17(r.p1) + " below " + g17(box.attainment) + "; ";
        }
    }
    o.table.metadata["trace_columns"] = {"rho", "p1lin", "p1", "rho_step", "p1lin_step"};
    o.table.metadata["traces"] = traces;
    return o;
}

Outcome cmd_eels(const RunConfig& c)
{
    const TransitionSymmetry sym = TransitionSymmetry::parse(c.symmetry);
    const CouplingModel model = nonrecoil_coupling({sym, c.rho, c.p1lin, c.velocity, c.omega10});
    std::size_t n = 1;
    std::optional<LevelSystem> system;
    if (c.system == "two-level") {
        system = LevelSystem::two_level(model, c.omega10, c.velocity);
    } else {
        n = c.truncation > 0 ? c.truncation : coherent_truncation(boson_coherent(model, c.omega10, c.velocity, {}).mean);
        n = std::max(n, c.initial.size() + 8);
        system = LevelSystem::boson_ladder(model, c.omega10, n, c.velocity);
    }
    std::vector<std::complex<double>> a = c.initial;
    require(a.size() <= n + 1, "initial", "more amplitudes than levels");
    a.resize(n + 1);
    IntegrationOptions io;
    io.tolerance = c.tolerance;
    const auto sup = propagate_superposition(*system, InitialState(a), io);
    const auto lines = eels_spectrum(sup);

    Outcome o;
    o.converged = sup.norm_drift <= 1e-8;
    o.table.columns = {"system", "symmetry", "rho", "p1lin", "frequency", "weight"};
    for (const auto& l : lines)
        o.table.rows.push_back({c.system, sym.label(), c.rho, c.p1lin, l.frequency, l.weight});
    o.table.metadata = base_metadata(c);
    o.table.metadata["level_probabilities"] = sup.probabilities;
    o.table.metadata["norm_drift"] = sup.norm_drift;
    o.table.metadata["tail_estimate"] = sup.tail_estimate;
    o.table.metadata["levels"] = n + 1;
    if (!o.converged)
        o.diagnostics = "norm drift " + g17(sup.norm_drift) + " exceeds 1e-8";
    return o;
}

// ---- command line ----------------------------------------------------------

using Overlay = std::vector<std::function<void(RunConfig&)>>;

template <class T>
void flag(CLI::App* app, Overlay& ov, const std::string& name, T RunConfig::*field, const std::string& help)
{
    auto holder = std::make_shared<T>();
    CLI::Option* o = app->add_option(name, *holder, help);
    ov.push_back([o, holder, field](RunConfig& c) {
        if (o->count() > 0)
            c.*field = *holder;
    });
}

void bool_flag(CLI::App* app, Overlay& ov, const std::string& name, bool RunConfig::*field, const std::string& help)
{
    auto holder = std::make_shared<bool>(false);
    CLI::Option* o = app->add_flag(name, *holder, help);
    ov.push_back([o, holder, field](RunConfig& c) {
        if (o->count() > 0)
            c.*field = *holder;
    });
}

struct Common {
    std::string config_path;
    bool dump = false;
    bool seedless = false;
};

void add_common(CLI::App* app, Overlay& ov, Common& common)
{
    app->add_option("--config", common.config_path, "JSON configuration file (flags take precedence)");
    app->add_flag("--dump-config", common.dump, "print the merged configuration as JSON and exit");
    app->add_flag("--seedless", common.seedless, "accepted for compatibility; every run is deterministic");
    flag(app, ov, "--format", &RunConfig::format, "csv, json or auto");
    flag(app, ov, "--output,-o", &RunConfig::output, "output file ('-' or empty for stdout)");
}

void add_physics(CLI::App* app, Overlay& ov, bool energy)
{
    flag(app, ov, "--symmetry", &RunConfig::symmetry, "p_x, p_z, d_z2, d_xz or d_x2y2");
    flag(app, ov, "--rho", &RunConfig::rho, "omega10 R_e / v");
    flag(app, ov, "--p1lin", &RunConfig::p1lin, "linear excitation probability");
    if (energy)
        flag(app, ov, "--energy-ratio", &RunConfig::energy_ratio, "eps0 / omega10");
}

void add_velocity(CLI::App* app, Overlay& ov)
{
    flag(app, ov, "--velocity", &RunConfig::velocity, "electron velocity");
    flag(app, ov, "--omega10", &RunConfig::omega10, "transition frequency");
    flag(app, ov, "--tolerance", &RunConfig::tolerance, "integrator per-step tolerance");
}

void add_grid(CLI::App* app, Overlay& ov)
{
    flag(app, ov, "--grid-mode", &RunConfig::grid_mode, "centered-forward or symmetric-full");
    flag(app, ov, "--pole-quadrature", &RunConfig::pole_quadrature, "subtracted or bin-integrated");
    flag(app, ov, "--grid-points", &RunConfig::grid_points, "2N+1 (overrides the automatic grid)");
    flag(app, ov, "--c-delta", &RunConfig::c_delta, "range = c_delta * forward transfer");
    bool_flag(app, ov, "--refine,!--no-refine", &RunConfig::refine, "extra solve for eps_conv");
    flag(app, ov, "--convergence-tolerance", &RunConfig::convergence_tolerance, "largest accepted eps_conv");
}

RunConfig load_config(const std::string& path, const std::string& command)
{
    RunConfig base;
    base.command = command;
    if (path.empty())
        return base;
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("config: cannot open '" + path + "': " + std::strerror(errno));
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("config: '" + path + "' is not valid JSON: " + e.what());
    }
    RunConfig c = config_from_json(j, base);
    if (j.contains("command") && c.command != command)
        throw InvalidInput("command: configuration is for '" + c.command + "', not '" + command + "'");
    c.command = command;
    return c;
}

void emit(const RunConfig& c, const Outcome& o, std::ostream& out, std::ostream& err)
{
    write_output(o.table, resolve_format(c), c.output, out);
    if (!o.converged)
        err << "error: solver did not converge: " << o.diagnostics << "\n";
}

} // namespace

nlohmann::ordered_json to_json(const RunConfig& c)
{
    ojson j;
    j["command"] = c.command;
    j["symmetry"] = c.symmetry;
    j["rho"] = c.rho;
    j["p1lin"] = c.p1lin;
    j["energy_ratio"] = c.energy_ratio;
    j["velocity"] = c.velocity;
    j["omega10"] = c.omega10;
    j["p1lin_min"] = c.p1lin_min;
    j["p1lin_max"] = c.p1lin_max;
    j["points"] = c.points;
    j["grid_mode"] = c.grid_mode;
    j["pole_quadrature"] = c.pole_quadrature;
    j["grid_points"] = c.grid_points ? ojson(*c.grid_points) : ojson(nullptr);
    j["c_delta"] = c.c_delta ? ojson(*c.c_delta) : ojson(nullptr);
    j["refine"] = c.refine;
    j["convergence_tolerance"] = c.convergence_tolerance;
    j["method"] = c.method;
    j["levels"] = c.levels;
    j["trajectory"] = c.trajectory;
    j["samples"] = c.samples;
    j["tolerance"] = c.tolerance;
    j["solver"] = c.solver;
    ojson axes = ojson::array();
    for (const auto& a : c.axes)
        axes.push_back({{"name", a.name}, {"min", a.min}, {"max", a.max}, {"count", a.count}, {"scale", to_string(a.scale)}});
    j["axes"] = axes;
    j["name"] = c.name;
    j["rho_min"] = c.rho_min;
    j["rho_max"] = c.rho_max;
    j["search_p1lin_min"] = c.search_p1lin_min;
    j["search_p1lin_max"] = c.search_p1lin_max;
    j["rho_count"] = c.rho_count;
    j["p1lin_count"] = c.p1lin_count;
    j["rho_scale"] = c.rho_scale;
    j["step_tolerance"] = c.step_tolerance;
    j["system"] = c.system;
    ojson init = ojson::array();
    for (const auto& a : c.initial)
        init.push_back({a.real(), a.imag()});
    j["initial"] = init;
    j["truncation"] = c.truncation;
    j["format"] = c.format;
    j["output"] = c.output;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c)
{
    if (!j.is_object())
        throw InvalidInput("config: top level must be a JSON object");
    static const std::vector<std::string> known = {
        "command", "symmetry", "rho", "p1lin", "energy_ratio", "velocity", "omega10", "p1lin_min", "p1lin_max",
        "points", "grid_mode", "pole_quadrature", "grid_points", "c_delta", "refine", "convergence_tolerance", "method", "levels",
        "trajectory", "samples", "tolerance", "solver", "axes", "name", "rho_min", "rho_max", "search_p1lin_min",
        "search_p1lin_max", "rho_count", "p1lin_count", "rho_scale", "step_tolerance", "system", "initial",
        "truncation", "format", "output"};
    for (const auto& item : j.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw InvalidInput(item.key() + ": unknown configuration key");

    read_key(j, "command", c.command);
    read_key(j, "symmetry", c.symmetry);
    read_key(j, "rho", c.rho);
    read_key(j, "p1lin", c.p1lin);
    read_key(j, "energy_ratio", c.energy_ratio);
    read_key(j, "velocity", c.velocity);
    read_key(j, "omega10", c.omega10);
    read_key(j, "p1lin_min", c.p1lin_min);
    read_key(j, "p1lin_max", c.p1lin_max);
    read_key(j, "points", c.points);
    read_key(j, "grid_mode", c.grid_mode);
    read_key(j, "pole_quadrature", c.pole_quadrature);
    read_optional(j, "grid_points", c.grid_points);
    read_optional(j, "c_delta", c.c_delta);
    read_key(j, "refine", c.refine);
    read_key(j, "convergence_tolerance", c.convergence_tolerance);
    read_key(j, "method", c.method);
    read_key(j, "levels", c.levels);
    read_key(j, "trajectory", c.trajectory);
    read_key(j, "samples", c.samples);
    read_key(j, "tolerance", c.tolerance);
    read_key(j, "solver", c.solver);
    if (j.contains("axes")) {
        const auto& axes = j.at("axes");
        require(axes.is_array(), "axes", "expected an array");
        c.axes.clear();
        for (const auto& a : axes) {
            if (a.is_string()) {
                c.axes.push_back(parse_axis(a.get<std::string>()));
                continue;
            }
            require(a.is_object(), "axes", "each axis is an object or a name:min:max:count[:scale] string");
            Axis ax;
            read_key(a, "name", ax.name);
            read_key(a, "min", ax.min);
            read_key(a, "max", ax.max);
            read_key(a, "count", ax.count);
            if (a.contains("scale"))
                ax.scale = parse_scale(a.at("scale").get<std::string>());
            c.axes.push_back(ax);
        }
    }
    read_key(j, "name", c.name);
    read_key(j, "rho_min", c.rho_min);
    read_key(j, "rho_max", c.rho_max);
    read_key(j, "search_p1lin_min", c.search_p1lin_min);
    read_key(j, "search_p1lin_max", c.search_p1lin_max);
    read_key(j, "rho_count", c.rho_count);
    read_key(j, "p1lin_count", c.p1lin_count);
    read_key(j, "rho_scale", c.rho_scale);
    read_key(j, "step_tolerance", c.step_tolerance);
    read_key(j, "system", c.system);
    if (j.contains("initial")) {
        const auto& init = j.at("initial");
        require(init.is_array(), "initial", "expected an array of numbers or [re, im] pairs");
        c.initial.clear();
        for (const auto& a : init) {
            if (a.is_number())
                c.initial.emplace_back(a.get<double>(), 0.0);
            else if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number())
                c.initial.emplace_back(a[0].get<double>(), a[1].get<double>());
            else
                throw InvalidInput("initial: expected numbers or [re, im] pairs");
        }
    }
    read_key(j, "truncation", c.truncation);
    read_key(j, "format", c.format);
    read_key(j, "output", c.output);
    return c;
}

void validate(const RunConfig& c)
{
    const std::string& cmd = c.command;
    require(c.format == "auto" || c.format == "csv" || c.format == "json", "format", "expected csv, json or auto");
    if (cmd == "pointlike") {
        require(c.p1lin_min >= 0.0 && std::isfinite(c.p1lin_min), "p1lin_min", "must be non-negative");
        require(c.p1lin_max > c.p1lin_min && std::isfinite(c.p1lin_max), "p1lin_max", "must exceed p1lin_min");
        require(c.points >= 2, "points", "must be at least 2");
        return;
    }
    const bool multi = cmd == "sweep" || cmd == "find-max";
    if (!(multi && c.symmetry == "all"))
        (void)TransitionSymmetry::parse(c.symmetry);
    require(finite_positive(c.rho), "rho", "must be positive");
    require(finite_positive(c.p1lin), "p1lin", "must be positive");
    require(finite_positive(c.energy_ratio), "energy_ratio", "must be positive");
    require(finite_positive(c.velocity), "velocity", "must be positive");
    require(finite_positive(c.omega10), "omega10", "must be positive");
    require(finite_positive(c.tolerance), "tolerance", "must be positive");
    require(c.samples >= 2, "samples", "must be at least 2");
    require(c.grid_mode == "centered-forward" || c.grid_mode == "symmetric-full", "grid_mode",
            "expected centered-forward or symmetric-full");
    require(c.pole_quadrature == "subtracted" || c.pole_quadrature == "bin-integrated", "pole_quadrature",
            "expected subtracted or bin-integrated");
    require(!c.grid_points || *c.grid_points >= 3, "grid_points", "must be at least 3");
    require(!c.c_delta || finite_positive(*c.c_delta), "c_delta", "must be positive");
    require(finite_positive(c.convergence_tolerance), "convergence_tolerance", "must be positive");
    require(c.levels >= 1, "levels", "must be at least 1");

    if (cmd == "recoil" || (cmd == "boson" && c.method == "recoil")) {
        require(c.energy_ratio > 1.0 || c.energy_ratio < 1.0, "energy_ratio", "must not sit exactly at threshold");
    }
    if (cmd == "boson")
        require(c.method == "nonrecoil-analytic" || c.method == "nonrecoil-ode" || c.method == "recoil", "method",
                "expected nonrecoil-analytic, nonrecoil-ode or recoil");
    if (cmd == "sweep") {
        try {
            (void)parse_solver(c.solver);
        } catch (const InvalidInput&) {
            throw InvalidInput("solver: expected pointlike, nonrecoil, recoil, boson-nonrecoil or boson-recoil");
        }
        require(!c.axes.empty(), "axes", "a sweep needs at least one axis");
        SweepSpec s;
        s.axes = c.axes;
        try {
            s.validate();
        } catch (const InvalidInput& e) {
            throw InvalidInput(std::string("axes: ") + e.what());
        }
        if (parse_solver(c.solver) == SolverKind::BosonNonrecoil)
            require(c.method != "recoil", "method", "boson-nonrecoil sweeps take analytic or ode");
        require(!c.name.empty(), "name", "must not be empty");
    }
    if (cmd == "find-max") {
        require(finite_positive(c.rho_min), "rho_min", "must be positive");
        require(c.rho_max > c.rho_min && std::isfinite(c.rho_max), "rho_max", "must exceed rho_min");
        require(finite_positive(c.search_p1lin_min), "search_p1lin_min", "must be positive");
        require(c.search_p1lin_max > c.search_p1lin_min && std::isfinite(c.search_p1lin_max), "search_p1lin_max",
                "must exceed search_p1lin_min");
        require(c.rho_count >= 2, "rho_count", "must be at least 2");
        require(c.p1lin_count >= 2, "p1lin_count", "must be at least 2");
        require(c.rho_scale == "linear" || c.rho_scale == "log", "rho_scale", "expected linear or log");
        require(finite_positive(c.step_tolerance), "step_tolerance", "must be positive");
    }
    if (cmd == "eels") {
        require(c.system == "two-level" || c.system == "boson", "system", "expected two-level or boson");
        require(!c.initial.empty(), "initial", "must list at least one amplitude");
        double n = 0.0;
        for (const auto& a : c.initial)
            n += std::norm(a);
        require(std::abs(n - 1.0) <= 1e-12, "initial", "amplitudes must be normalized to 1");
        if (c.system == "two-level")
            require(c.initial.size() <= 2, "initial", "a two-level system has two amplitudes");
    }
}

Format parse_format(std::string_view name)
{
    if (name == "csv")
        return Format::Csv;
    if (name == "json")
        return Format::Json;
    throw InvalidInput("format: expected csv or json");
}

void write_csv(const Table& table, std::ostream& out)
{
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        out << (i ? "," : "") << csv_field(table.columns[i]);
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << cell_text(row[i]);
        out << '\n';
    }
}

nlohmann::ordered_json to_json(const Table& table)
{
    ojson j;
    j["metadata"] = table.metadata;
    ojson data = ojson::array();
    for (const auto& row : table.rows) {
        ojson rec = ojson::object();
        for (std::size_t i = 0; i < row.size() && i < table.columns.size(); ++i)
            rec[table.columns[i]] = cell_json(row[i]);
        data.push_back(std::move(rec));
    }
    j["data"] = std::move(data);
    return j;
}

void write_output(const Table& table, Format format, const std::string& path, std::ostream& stdout_stream)
{
    auto render = [&](std::ostream& os) {
        if (format == Format::Csv)
            write_csv(table, os);
        else
            os << to_json(table).dump(2) << '\n';
    };
    if (path.empty() || path == "-") {
        render(stdout_stream);
        return;
    }
    auto write_file = [](const std::string& p, const std::function<void(std::ostream&)>& body) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f)
            throw IoError("cannot open '" + p + "' for writing: " + std::strerror(errno));
        body(f);
        f.flush();
        if (!f)
            throw IoError("write to '" + p + "' failed: " + std::strerror(errno));
    };
    write_file(path, render);
    if (format == Format::Csv)
        write_file(path + ".meta.json", [&](std::ostream& os) { os << table.metadata.dump(2) << '\n'; });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Single-electron excitation probabilities of two-level systems and bosonic modes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    struct Sub {
        CLI::App* app;
        Overlay overlay;
        Common common;
    };
    std::vector<std::unique_ptr<Sub>> subs;
    auto add = [&](const char* name, const char* help) {
        subs.push_back(std::make_unique<Sub>());
        Sub& s = *subs.back();
        s.app = app.add_subcommand(name, help);
        add_common(s.app, s.overlay, s.common);
        return &s;
    };

    Sub* pointlike = add("pointlike", "closed-form point-like probabilities over a P1lin range");
    flag(pointlike->app, pointlike->overlay, "--p1lin-min", &RunConfig::p1lin_min, "first P1lin");
    flag(pointlike->app, pointlike->overlay, "--p1lin-max", &RunConfig::p1lin_max, "last P1lin");
    flag(pointlike->app, pointlike->overlay, "--points", &RunConfig::points, "number of rows");

    Sub* nonrecoil = add("nonrecoil", "nonrecoil amplitude integration for a two-level sample");
    add_physics(nonrecoil->app, nonrecoil->overlay, false);
    add_velocity(nonrecoil->app, nonrecoil->overlay);
    flag(nonrecoil->app, nonrecoil->overlay, "--trajectory", &RunConfig::trajectory, "write f_j(z) samples to this CSV");
    flag(nonrecoil->app, nonrecoil->overlay, "--samples", &RunConfig::samples, "trajectory samples over [-Z, Z]");

    Sub* recoil = add("recoil", "full recoil solution for a two-level sample");
    add_physics(recoil->app, recoil->overlay, true);
    add_grid(recoil->app, recoil->overlay);

    Sub* boson = add("boson", "bosonic mode occupations");
    add_physics(boson->app, boson->overlay, true);
    add_velocity(boson->app, boson->overlay);
    add_grid(boson->app, boson->overlay);
    flag(boson->app, boson->overlay, "--method", &RunConfig::method, "nonrecoil-analytic, nonrecoil-ode or recoil");
    flag(boson->app, boson->overlay, "--levels", &RunConfig::levels, "minimum number of occupations reported");
    flag(boson->app, boson->overlay, "--truncation", &RunConfig::truncation, "fixed ladder truncation (0: automatic)");

    Sub* sweep = add("sweep", "parameter sweep");
    add_physics(sweep->app, sweep->overlay, true);
    add_grid(sweep->app, sweep->overlay);
    flag(sweep->app, sweep->overlay, "--solver", &RunConfig::solver,
         "pointlike, nonrecoil, recoil, boson-nonrecoil or boson-recoil");
    flag(sweep->app, sweep->overlay, "--method", &RunConfig::method, "boson-nonrecoil method: analytic or ode");
    flag(sweep->app, sweep->overlay, "--levels", &RunConfig::levels, "boson occupation columns p0..pN");
    flag(sweep->app, sweep->overlay, "--name", &RunConfig::name, "file prefix when --symmetry all");
    auto axis_strings = std::make_shared<std::vector<std::string>>();
    CLI::Option* axis_opt = sweep->app->add_option("--axis", *axis_strings, "name:min:max:count[:scale], repeatable");
    sweep->overlay.push_back([axis_opt, axis_strings](RunConfig& c) {
        if (axis_opt->count() == 0)
            return;
        c.axes.clear();
        for (const auto& s : *axis_strings)
            c.axes.push_back(parse_axis(s));
    });

    Sub* findmax = add("find-max", "locate the maximum of P1 over (rho, P1lin)");
    flag(findmax->app, findmax->overlay, "--symmetry", &RunConfig::symmetry, "symmetry or 'all'");
    flag(findmax->app, findmax->overlay, "--rho-min", &RunConfig::rho_min, "search box");
    flag(findmax->app, findmax->overlay, "--rho-max", &RunConfig::rho_max, "search box");
    flag(findmax->app, findmax->overlay, "--p1lin-min", &RunConfig::search_p1lin_min, "search box");
    flag(findmax->app, findmax->overlay, "--p1lin-max", &RunConfig::search_p1lin_max, "search box");
    flag(findmax->app, findmax->overlay, "--rho-count", &RunConfig::rho_count, "coarse scan points in rho");
    flag(findmax->app, findmax->overlay, "--p1lin-count", &RunConfig::p1lin_count, "coarse scan points in P1lin");
    flag(findmax->app, findmax->overlay, "--rho-scale", &RunConfig::rho_scale, "linear or log");
    flag(findmax->app, findmax->overlay, "--step-tolerance", &RunConfig::step_tolerance, "final pattern step");
    flag(findmax->app, findmax->overlay, "--tolerance", &RunConfig::tolerance, "integrator per-step tolerance");

    Sub* eels = add("eels", "energy-loss line spectrum in the nonrecoil regime");
    add_physics(eels->app, eels->overlay, false);
    add_velocity(eels->app, eels->overlay);
    flag(eels->app, eels->overlay, "--system", &RunConfig::system, "two-level or boson");
    flag(eels->app, eels->overlay, "--truncation", &RunConfig::truncation, "boson ladder truncation (0: automatic)");
    auto initial_text = std::make_shared<std::string>();
    CLI::Option* init_opt = eels->app->add_option("--initial", *initial_text,
                                                  "initial amplitudes, comma separated, each re or re:im");
    eels->overlay.push_back([init_opt, initial_text](RunConfig& c) {
        if (init_opt->count() > 0)
            c.initial = parse_initial(*initial_text);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        // subcommand help requests arrive here too
        if (e.get_exit_code() == 0) {
            for (const auto& s : subs)
                if (s->app->parsed())
                    out << s->app->help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 2;
    }

    Sub* active = nullptr;
    for (const auto& s : subs)
        if (s->app->parsed())
            active = s.get();
    const std::string command = active->app->get_name();

    RunConfig config;
    try {
        config = load_config(active->common.config_path, command);
        for (const auto& apply : active->overlay)
            apply(config);
        validate(config);
        if (active->common.dump) {
            out << to_json(config).dump(2) << "\n";
            return 0;
        }
        if (command == "pointlike")
            emit(config, cmd_pointlike(config), out, err);
        else if (command == "nonrecoil") {
            const Outcome o = cmd_nonrecoil(config, out);
            emit(config, o, out, err);
            return o.converged ? 0 : 3;
        } else if (command == "recoil") {
            const Outcome o = cmd_recoil(config);
            emit(config, o, out, err);
            return o.converged ? 0 : 3;
        } else if (command == "boson") {
            const Outcome o = cmd_boson(config);
            emit(config, o, out, err);
            return o.converged ? 0 : 3;
        } else if (command == "sweep") {
            return cmd_sweep(config, out, err);
        } else if (command == "find-max") {
            const Outcome o = cmd_find_max(config);
            emit(config, o, out, err);
            return o.converged ? 0 : 3;
        } else if (command == "eels") {
            const Outcome o = cmd_eels(config);
            emit(config, o, out, err);
            return o.converged ? 0 : 3;
        }
    } catch (const InvalidInput& e) {
        err << "error: invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const ConvergenceError& e) {
        err << "error: solver did not converge: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace ekick::cli
