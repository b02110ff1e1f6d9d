#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ekick/sweep.hpp"

namespace ekick::cli {

inline constexpr const char* kToolName = "ekick";
inline constexpr const char* kToolVersion = "1.0.0";

/// Every parameter any subcommand reads. Keys in the JSON config file are
/// the field names below.
struct RunConfig {
    std::string command;
    std::string symmetry = "p_x";
    double rho = 0.2;
    double p1lin = 1.0;
    double energy_ratio = 100.0;
    double velocity = 1.0;
    double omega10 = 1.0;
    // pointlike
    double p1lin_min = 0.0;
    double p1lin_max = 10.0;
    std::size_t points = 500;
    // recoil grid
    std::string grid_mode = "centered-forward";
    std::string pole_quadrature = "subtracted";
    std::optional<int> grid_points;
    std::optional<double> c_delta;
    bool refine = true;
    double convergence_tolerance = 1e-3;
    // boson
    std::string method = "nonrecoil-analytic";
    std::size_t levels = 8;
    // nonrecoil integration
    std::string trajectory;
    std::size_t samples = 2001;
    double tolerance = 1e-11;
    // sweep
    std::string solver = "nonrecoil";
    std::vector<Axis> axes;
    std::string name = "fig2";
    // find-max
    double rho_min = 0.02;
    double rho_max = 3.0;
    double search_p1lin_min = 0.2;
    double search_p1lin_max = 8.0;
    std::size_t rho_count = 40;
    std::size_t p1lin_count = 40;
    std::string rho_scale = "log";
    double step_tolerance = 1e-4;
    // eels
    std::string system = "two-level";
    std::vector<std::complex<double>> initial{{1.0, 0.0}};
    std::size_t truncation = 0; ///< 0: automatic
    // output
    std::string format = "auto";
    std::string output;

    bool operator==(const RunConfig&) const = default;
};

nlohmann::ordered_json to_json(const RunConfig& config);
/// Keys absent from `j` keep the defaults of `base`; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
/// Field-level validation; throws InvalidInput naming the field.
void validate(const RunConfig& config);

using Cell = std::variant<double, long long, std::string, bool>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

enum class Format { Csv, Json };
Format parse_format(std::string_view name);

/// %.17g doubles, LF line endings, RFC 4180 quoting where needed.
void write_csv(const Table& table, std::ostream& out);
nlohmann::ordered_json to_json(const Table& table);
/// Writes to `path` ("" or "-" is stdout). CSV files get a `<path>.meta.json`
/// sidecar with the metadata.
void write_output(const Table& table, Format format, const std::string& path, std::ostream& stdout_stream);

/// Full command line entry point; returns the process exit code
/// (0 success, 2 invalid configuration, 3 solver non-convergence, 1 I/O).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ekick::cli
