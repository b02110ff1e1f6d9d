#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ekick/cli.hpp"
#include "ekick/closed_forms.hpp"
#include "ekick/error.hpp"
#include "ekick/nonrecoil.hpp"
#include "ekick/recoil.hpp"
#include "ekick/sweep.hpp"

namespace py = pybind11;
using namespace ekick;

namespace {

py::dict pointlike(double p1lin, bool backscatter)
{
    const auto r = backscatter ? pointlike_with_backscatter(p1lin) : pointlike_no_backscatter(p1lin);
    py::dict d;
    d["p0"] = r.p0;
    d["p1"] = r.p1;
    return d;
}

py::dict nonrecoil(const std::string& symmetry, double rho, double p1lin, double velocity, double omega10,
                   double tolerance, std::size_t samples)
{
    IntegrationOptions o;
    o.tolerance = tolerance;
    o.samples = samples;
    const auto r = nonrecoil_solve({TransitionSymmetry::parse(symmetry), rho, p1lin, velocity, omega10}, o);
    py::dict d;
    d["p0"] = r.probability(0);
    d["p1"] = r.probability(1);
    d["norm_drift"] = r.norm_drift;
    d["tail_estimate"] = r.tail_estimate;
    d["half_range"] = r.half_range;
    py::array_t<double> z(r.z.size());
    py::array_t<std::complex<double>> f({r.z.size(), std::size_t(2)});
    auto zm = z.mutable_unchecked<1>();
    auto fm = f.mutable_unchecked<2>();
    for (std::size_t k = 0; k < r.z.size(); ++k) {
        zm(k) = r.z[k];
        fm(k, 0) = r.amplitudes[k][0];
        fm(k, 1) = r.amplitudes[k][1];
    }
    d["z"] = z;
    d["amplitudes"] = f;
    return d;
}

RecoilOptions recoil_options(const std::string& grid_mode, const std::string& pole_quadrature,
                             std::optional<int> points, std::optional<double> c_delta, bool refine)
{
    RecoilOptions o;
    o.grid.mode = parse_grid_mode(grid_mode);
    o.grid.quadrature = parse_pole_quadrature(pole_quadrature);
    o.points = points;
    o.c_delta = c_delta;
    o.refine = refine;
    return o;
}

py::dict solution_dict(const RecoilSolution& s)
{
    std::vector<double> total, forward, backward;
    for (const auto& l : s.levels) {
        total.push_back(l.total);
        forward.push_back(l.forward);
        backward.push_back(l.backward);
    }
    py::dict d;
    d["probabilities"] = total;
    d["forward"] = forward;
    d["backward"] = backward;
    d["eps_conv"] = s.eps_conv;
    d["sum_deviation"] = s.sum_deviation;
    d["refinement_change"] = s.refinement_change;
    d["mean_occupation"] = s.mean_occupation;
    d["grid_points"] = s.grid.size();
    d["grid_range"] = s.grid.range;
    d["grid_spacing"] = s.grid.spacing;
    d["solved"] = s.solved;
    return d;
}

py::dict recoil(const std::string& symmetry, double rho, double p1lin, double energy_ratio,
                const std::string& grid_mode, const std::string& pole_quadrature, std::optional<int> points,
                std::optional<double> c_delta, bool refine, bool boson)
{
    const RecoilPoint pt{TransitionSymmetry::parse(symmetry), rho, p1lin, energy_ratio};
    const auto o = recoil_options(grid_mode, pole_quadrature, points, c_delta, refine);
    return solution_dict(boson ? recoil_boson(pt, o) : recoil_two_level(pt, o));
}

py::dict boson_nonrecoil(const std::string& symmetry, double rho, double p1lin, const std::string& method,
                         std::size_t levels)
{
    const auto c = nonrecoil_coupling({TransitionSymmetry::parse(symmetry), rho, p1lin});
    py::dict d;
    if (method == "analytic") {
        const auto co = boson_coherent(c, 1.0, 1.0, {});
        d["mean"] = co.mean;
        d["occupations"] = co.occupations(levels);
    } else if (method == "ode") {
        IntegrationOptions o;
        o.samples = 0;
        const auto l = boson_ladder_ode(c, 1.0, 1.0, o);
        std::vector<double> occ(levels + 1, 0.0);
        for (std::size_t j = 0; j <= levels; ++j)
            occ[j] = l.trajectory.probability(j);
        d["mean"] = l.mean;
        d["occupations"] = occ;
        d["truncation"] = l.truncation;
    } else {
        throw InvalidInput("method: expected analytic or ode");
    }
    return d;
}

SearchBox search_box(double rho_min, double rho_max, double p1lin_min, double p1lin_max, std::size_t rho_count,
                     std::size_t p1lin_count)
{
    SearchBox b;
    b.rho_min = rho_min;
    b.rho_max = rho_max;
    b.p1lin_min = p1lin_min;
    b.p1lin_max = p1lin_max;
    b.rho_count = rho_count;
    b.p1lin_count = p1lin_count;
    return b;
}

py::tuple run_cli(const std::vector<std::string>& args)
{
    std::vector<const char*> argv = {cli::kToolName};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(int(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
}

} // namespace

PYBIND11_MODULE(_ekick, m)
{
    m.doc() = "Single-electron excitation of few-level samples with and without recoil";
    m.attr("__version__") = cli::kToolVersion;

    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const InvalidInput& e) {
            py::set_error(PyExc_ValueError, e.what());
        }
    });

    m.def("symmetries", [] {
        std::vector<std::string> out;
        for (auto s : all_symmetries())
            out.push_back(TransitionSymmetry::of(s).label());
        return out;
    });
    m.def("pointlike", &pointlike, py::arg("p1lin"), py::arg("backscatter") = true);
    m.def("poisson", py::overload_cast<double, std::size_t>(&poisson_occupations), py::arg("mean"),
          py::arg("n_max"));
    m.def("nonrecoil", &nonrecoil, py::arg("symmetry"), py::arg("rho"), py::arg("p1lin"),
          py::arg("velocity") = 1.0, py::arg("omega10") = 1.0, py::arg("tolerance") = 1e-11,
          py::arg("samples") = std::size_t(0));
    m.def("recoil", &recoil, py::arg("symmetry"), py::arg("rho"), py::arg("p1lin"), py::arg("energy_ratio"),
          py::arg("grid_mode") = "centered-forward", py::arg("pole_quadrature") = "subtracted",
          py::arg("points") = py::none(), py::arg("c_delta") = py::none(), py::arg("refine") = true,
          py::arg("boson") = false);
    m.def("boson_nonrecoil", &boson_nonrecoil, py::arg("symmetry"), py::arg("rho"), py::arg("p1lin"),
          py::arg("method") = "analytic", py::arg("levels") = std::size_t(8));
    m.def(
        "find_maximum",
        [](const std::string& symmetry, double rho_min, double rho_max, double p1lin_min, double p1lin_max,
           std::size_t rho_count, std::size_t p1lin_count) {
            const auto r = find_maximum(TransitionSymmetry::parse(symmetry),
                                        search_box(rho_min, rho_max, p1lin_min, p1lin_max, rho_count, p1lin_count));
            py::dict d;
            d["rho"] = r.rho;
            d["p1lin"] = r.p1lin;
            d["p1"] = r.p1;
            d["attained"] = r.attained;
            d["at_lower_rho_edge"] = r.at_lower_rho_edge;
            d["evaluations"] = r.evaluations;
            return d;
        },
        py::arg("symmetry"), py::arg("rho_min") = 0.02, py::arg("rho_max") = 3.0, py::arg("p1lin_min") = 0.2,
        py::arg("p1lin_max") = 8.0, py::arg("rho_count") = std::size_t(40), py::arg("p1lin_count") = std::size_t(40));
    m.def("run_cli", &run_cli, py::arg("args"),
          "Runs the command line tool in process; returns (exit_code, stdout, stderr).");
}
