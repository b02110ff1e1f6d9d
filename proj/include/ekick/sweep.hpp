#pragma once

// Parameter sweeps over (rho, p1lin, energy_ratio) for every solver, and
// the (rho, p1lin) maximum search behind the complete-excitation points.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ekick/coupling.hpp"
#include "ekick/nonrecoil.hpp"
#include "ekick/recoil.hpp"

namespace ekick {

enum class SolverKind { Pointlike, Nonrecoil, Recoil, BosonNonrecoil, BosonRecoil };
enum class AxisScale { Linear, Log };
enum class BosonMethod { Analytic, Ode };

const char* to_string(SolverKind kind) noexcept;
SolverKind parse_solver(std::string_view name);
const char* to_string(AxisScale scale) noexcept;
AxisScale parse_scale(std::string_view name);
const char* to_string(BosonMethod method) noexcept;
BosonMethod parse_boson_method(std::string_view name);

/// One sweep axis; `name` is rho, p1lin or energy_ratio.
struct Axis {
    std::string name;
    double min = 0.0;
    double max = 1.0;
    std::size_t count = 2;
    AxisScale scale = AxisScale::Linear;

    std::vector<double> values() const;
    bool operator==(const Axis&) const = default;
};

struct SweepSpec {
    SolverKind solver = SolverKind::Nonrecoil;
    std::vector<Axis> axes;
    TransitionSymmetry symmetry = TransitionSymmetry::of(Symmetry::px);
    double rho = 0.2;
    double p1lin = 1.0;
    double energy_ratio = 100.0;
    // recoil grid overrides
    GridMode grid_mode = GridMode::CenteredForward;
    PoleQuadrature pole_quadrature = PoleQuadrature::Subtracted;
    std::optional<int> points;
    std::optional<double> c_delta;
    bool refine = true;
    // boson output
    BosonMethod boson_method = BosonMethod::Analytic;
    std::size_t levels = 8; ///< P_0..P_levels columns
    bool trajectory = false;
    double convergence_tolerance = 1e-3; ///< eps_conv above this marks a record unconverged

    void validate() const;
    /// Stable text form used for hashing and metadata.
    std::string canonical() const;
};

struct SweepRecord {
    std::vector<double> values; ///< aligned with SweepResult::columns
    bool converged = true;
    std::string error;          ///< nonempty when the solver failed at this point
};

struct SweepResult {
    SweepSpec spec;
    std::vector<std::string> columns;
    std::vector<SweepRecord> records; ///< row-major in axis declaration order
    std::string spec_hash;
    double runtime_seconds = 0.0;

    std::size_t failures() const;
};

/// Worker count from EKICK_WORKERS, else the hardware concurrency.
std::size_t default_workers();

/// FNV-1a 64-bit, hex encoded.
std::string stable_hash(std::string_view text);

/// Column names produced for a given spec (inputs first, then outputs).
std::vector<std::string> sweep_columns(const SweepSpec& spec);

/// Evaluates one point. Throws on solver failure.
SweepRecord evaluate_point(const SweepSpec& spec, double rho, double p1lin, double energy_ratio);

SweepResult run_sweep(const SweepSpec& spec, std::optional<std::size_t> workers = std::nullopt);

/// Evaluates `f(i)` for i in [0, count) on a bounded worker pool, storing
/// results by index.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, std::size_t workers, F&& f);

struct SearchBox {
    double rho_min = 0.02;
    double rho_max = 3.0;
    double p1lin_min = 0.2;
    double p1lin_max = 8.0;
    std::size_t rho_count = 40;
    std::size_t p1lin_count = 40;
    AxisScale rho_scale = AxisScale::Log;
    double step_tolerance = 1e-4;
    double attainment = 0.99;
};

struct SearchStep {
    double rho;
    double p1lin;
    double p1;
    double rho_step;
    double p1lin_step;
};

struct MaximumSearchResult {
    TransitionSymmetry symmetry;
    double rho = 0.0;
    double p1lin = 0.0;
    double p1 = 0.0;
    bool attained = false;     ///< p1 >= box.attainment
    bool at_lower_rho_edge = false;
    std::size_t evaluations = 0;
    std::vector<SearchStep> trace;
};

/// Coarse scan of the box followed by a compass search with step halving
/// down to box.step_tolerance in both coordinates.
MaximumSearchResult find_maximum(const TransitionSymmetry& symmetry, const SearchBox& box = {},
                                 const IntegrationOptions& options = {},
                                 std::optional<std::size_t> workers = std::nullopt);

struct FockPoint {
    double energy_ratio;
    std::vector<double> occupations; ///< recoil P_n
    double mean = 0.0;
    double eps_conv = 0.0;
    std::vector<double> nonrecoil_occupations;
    double nonrecoil_mean = 0.0;
    std::string error;
};

std::vector<FockPoint> fock_decomposition_sweep(const Axis& energy_ratio, double p1lin, double rho,
                                                const RecoilOptions& options = {},
                                                std::optional<std::size_t> workers = std::nullopt);

} // namespace ekick

#include "ekick/detail/parallel_map.hpp"
