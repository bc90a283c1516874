#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbs/solver.hpp"

namespace mbs {

/// Everything needed to fit one dataset.
struct FitRequest {
    std::string input;
    /// Output directory; created when missing.
    std::string output;
    std::string response;
    std::vector<std::string> covariates;
    /// Mesh size per covariate; a single value is reused for every axis.
    std::vector<int> mesh_size;
    /// Univariate smoothness r (r + 1 differences).
    std::optional<int> order_r;
    /// Multivariate difference counts per axis, one entry per multi-index.
    std::vector<std::vector<int>> orders;
    int order_k = 0;
    double ell = 1.0;
    /// Fixed lambda; unset with lambda_path false means 0.
    std::optional<double> lambda;
    bool lambda_path = false;
    int path_count = 50;
    double path_min = 1e-3;
    ADMMOptions solver;
    std::uint64_t seed = 0;
};

/// Exit codes of run_fit / run_simulate.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitMaxIterations = 2;

/// Parses "1,1;1,0;0,1" into difference-count multi-indices.
std::vector<std::vector<int>> parse_orders(const std::string& text);

/// Applies the keys of a JSON fit configuration on top of `req`.
void apply_fit_config(FitRequest& req, const nlohmann::json& j);

/// Fits and writes fitted.csv and mesh.csv (or mesh_NNN.csv plus
/// lambda_path.csv for a path) into req.output. Prints a one-line JSON
/// summary to `out` and error messages to `err`.
int run_fit(const FitRequest& req, std::ostream& out, std::ostream& err);

/// Runs the study described by the JSON file at `config_path` and writes
/// study.csv and study.json into `output`. `seed` overrides the config seed.
int run_simulate(const std::string& config_path, const std::string& output,
                 std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err);

/// Full command-line entry point ("fit" and "simulate" subcommands).
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mbs
