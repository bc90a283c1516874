#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbs/solver.hpp"

namespace mbs {

enum class Scenario { UnivariateExp, BivariateExp };

std::string to_string(Scenario s);
/// Accepts "univariate-exp" and "bivariate-exp".
Scenario scenario_from_string(const std::string& name);

struct RkPair {
    int r = 0;
    int k = 0;
};

struct StudyConfig {
    Scenario scenario = Scenario::UnivariateExp;
    std::vector<int> ns;
    /// Mesh size per axis.
    std::vector<int> ms;
    /// Smoothness/interpolation pairs; the bivariate scenario always uses the
    /// fused-lasso penalty with k = 0 and ignores this list when empty.
    std::vector<RkPair> rk_pairs;
    int replications = 50;
    int lambda_count = 50;
    double lambda_min = 1e-3;
    std::uint64_t seed = 0;
    double noise_sd = 1.0;
    /// Record wall time per cell. Off gives byte-identical repeated output.
    bool timing = true;
    ADMMOptions solver;

    void validate() const;
};

struct StudyRow {
    Scenario scenario = Scenario::UnivariateExp;
    int n = 0;
    int m = 0;
    int r = 0;
    int k = 0;
    int replications = 0;
    /// Empty when every replicate of the cell failed.
    std::optional<double> rmse_sum;
    std::optional<double> rmse_mean;
    std::optional<double> best_lambda_median;
    double runtime_ms = 0.0;
    int failed_replications = 0;
    /// "ok", or the first error message seen in the cell.
    std::string status = "ok";
};

struct UnivariateSample {
    std::vector<double> xs;  // sorted ascending
    Vector y;
    Vector truth;
};

struct BivariateSample {
    DenseMatrix x;  // n x 2
    Vector y;
    Vector truth;
};

double univariate_truth(double z);
double bivariate_truth(double x1, double x2);

UnivariateSample generate_univariate(int n, std::uint64_t seed, double noise_sd = 1.0);
BivariateSample generate_bivariate(int n, std::uint64_t seed, double noise_sd = 1.0);

/// Seed for replicate `rep` of sample size `n`, shared by every mesh size
/// and order pair so cells see common data.
std::uint64_t replicate_seed(std::uint64_t seed, int n, int rep);

/// One row per (n, m, r, k) cell, in config order (n outer, then m, then pair).
std::vector<StudyRow> run_rmse_study(const StudyConfig& config);

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows);
nlohmann::json study_to_json(const std::vector<StudyRow>& rows);

StudyConfig study_config_from_json(const nlohmann::json& j);
/// Config with every default filled in.
nlohmann::json study_config_to_json(const StudyConfig& config);

}  // namespace mbs
