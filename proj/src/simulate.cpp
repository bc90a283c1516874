#include "mbs/simulate.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "mbs/diffops.hpp"
#include "mbs/error.hpp"
#include "mbs/interp.hpp"
#include "mbs/mesh.hpp"

namespace mbs {

std::string to_string(Scenario s) {
    return s == Scenario::UnivariateExp ? "univariate-exp" : "bivariate-exp";
}

Scenario scenario_from_string(const std::string& name) {
    if (name == "univariate-exp") return Scenario::UnivariateExp;
    if (name == "bivariate-exp") return Scenario::BivariateExp;
    fail(ErrorCode::InvalidArgument, "unknown scenario '" + name + "'");
}

void StudyConfig::validate() const {
    require(!ns.empty() && !ms.empty(), "study needs at least one n and one m");
    require(replications >= 1, "replications must be >= 1");
    require(lambda_count >= 2, "lambda_count must be >= 2");
    require(lambda_min > 0.0 && std::isfinite(lambda_min), "lambda_min must be positive");
    require(noise_sd >= 0.0 && std::isfinite(noise_sd), "noise_sd must be >= 0");
    for (int n : ns) require(n >= 1, "every n must be >= 1");
    int max_r = 0;
    if (scenario == Scenario::UnivariateExp) {
        require(!rk_pairs.empty(), "univariate study needs at least one (r, k) pair");
        for (const auto& p : rk_pairs) {
            require(p.r >= 0 && p.k >= 0 && p.k <= p.r, "every pair needs 0 <= k <= r");
            max_r = std::max(max_r, p.r);
        }
    } else {
        for (const auto& p : rk_pairs) {
            require(p.r == 0 && p.k == 0, "the bivariate scenario supports only r = 0, k = 0");
        }
    }
    for (int m : ms) require(m >= max_r + 2, "every m must be >= max(r) + 2");
    solver.validate();
}

double univariate_truth(double z) { return std::exp(std::numbers::pi * z); }

double bivariate_truth(double x1, double x2) { return std::exp(std::numbers::pi * x1 * x2); }

UnivariateSample generate_univariate(int n, std::uint64_t seed, double noise_sd) {
    require(n >= 1, "n must be >= 1");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    UnivariateSample s;
    s.xs.resize(static_cast<std::size_t>(n));
    for (auto& x : s.xs) x = unif(gen);
    std::sort(s.xs.begin(), s.xs.end());
    s.y.resize(n);
    s.truth.resize(n);
    for (int i = 0; i < n; ++i) {
        s.truth[i] = univariate_truth(s.xs[static_cast<std::size_t>(i)]);
        s.y[i] = s.truth[i] + noise_sd * noise(gen);
    }
    return s;
}

BivariateSample generate_bivariate(int n, std::uint64_t seed, double noise_sd) {
    require(n >= 1, "n must be >= 1");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    BivariateSample s;
    s.x.resize(n, 2);
    s.y.resize(n);
    s.truth.resize(n);
    for (int i = 0; i < n; ++i) {
        s.x(i, 0) = unif(gen);
        s.x(i, 1) = unif(gen);
        s.truth[i] = bivariate_truth(s.x(i, 0), s.x(i, 1));
        s.y[i] = s.truth[i] + noise_sd * noise(gen);
    }
    return s;
}

std::uint64_t replicate_seed(std::uint64_t seed, int n, int rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(rep)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

struct CellAccumulator {
    std::vector<double> mse;
    std::vector<double> best_lambda;
    double seconds = 0.0;
    int failed = 0;
    std::string status = "ok";
};

struct CellProblem {
    SparseBandedMatrix interp;
    SparseBandedMatrix penalty;
    DenseMatrix null_basis;
};

/// Oracle-tuned squared error over the lambda path and the chosen lambda.
std::pair<double, double> best_over_path(const CellProblem& cell, const Vector& y,
                                         const Vector& truth, const StudyConfig& config) {
    MBSProblem prob{y, cell.interp, cell.penalty, 0.0, cell.null_basis};
    const double lmax = lambda_max(prob);
    std::vector<double> lambdas;
    if (lmax > config.lambda_min) {
        lambdas = lambda_grid(lmax, config.lambda_count, config.lambda_min);
    } else {
        lambdas = {config.lambda_min};
    }
    AdmmSolver solver(cell.interp, cell.penalty, y, config.solver);
    double best = std::numeric_limits<double>::infinity();
    double best_lambda = lambdas.front();
    for (double l : lambdas) {
        const FitResult fit = solver.solve(l);
        const double mse = (fit.fitted - truth).squaredNorm();
        if (mse < best) {
            best = mse;
            best_lambda = l;
        }
    }
    return {best, best_lambda};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

std::vector<StudyRow> run_rmse_study(const StudyConfig& config) {
    config.validate();
    const bool bivariate = config.scenario == Scenario::BivariateExp;
    std::vector<RkPair> pairs = config.rk_pairs;
    if (bivariate && pairs.empty()) pairs.push_back({0, 0});

    const std::size_t per_n = config.ms.size() * pairs.size();
    std::vector<CellAccumulator> cells(config.ns.size() * per_n);
    using Clock = std::chrono::steady_clock;

    for (std::size_t in = 0; in < config.ns.size(); ++in) {
        const int n = config.ns[in];
        for (int rep = 0; rep < config.replications; ++rep) {
            const std::uint64_t s = replicate_seed(config.seed, n, rep);
            UnivariateSample uni;
            BivariateSample bi;
            if (bivariate) {
                bi = generate_bivariate(n, s, config.noise_sd);
            } else {
                uni = generate_univariate(n, s, config.noise_sd);
            }
            const Vector& y = bivariate ? bi.y : uni.y;
            const Vector& truth = bivariate ? bi.truth : uni.truth;

            for (std::size_t im = 0; im < config.ms.size(); ++im) {
                const auto m = static_cast<std::size_t>(config.ms[im]);
                for (std::size_t ip = 0; ip < pairs.size(); ++ip) {
                    CellAccumulator& acc = cells[in * per_n + im * pairs.size() + ip];
                    const auto t0 = Clock::now();
                    try {
                        CellProblem cell;
                        if (bivariate) {
                            const double lo[2] = {0.0, 0.0};
                            const double hi[2] = {1.0, 1.0};
                            const std::size_t dims[2] = {m, m};
                            const TensorMesh mesh = TensorMesh::regular(lo, hi, dims);
                            const PenaltySpec spec = PenaltySpec::fused_lasso_2d();
                            cell.interp = mlp_matrix_multivariate(bi.x, mesh, 0).matrix;
                            cell.penalty = penalty_operator(mesh, spec);
                            cell.null_basis = penalty_null_space(mesh, spec);
                        } else {
                            const Mesh mesh = Mesh::regular(0.0, 1.0, m);
                            const int r = pairs[ip].r;
                            cell.interp = mlp_matrix(uni.xs, mesh, pairs[ip].k).matrix;
                            cell.penalty = normalized_difference_matrix(mesh, r, 1.0);
                            cell.null_basis =
                                penalty_null_space(TensorMesh({mesh}), PenaltySpec::univariate(r));
                        }
                        const auto [mse, lam] = best_over_path(cell, y, truth, config);
                        acc.mse.push_back(mse);
                        acc.best_lambda.push_back(lam);
                    } catch (const std::exception& e) {
                        if (acc.failed == 0) acc.status = e.what();
                        ++acc.failed;
                    }
                    acc.seconds += std::chrono::duration<double>(Clock::now() - t0).count();
                }
            }
        }
    }

    std::vector<StudyRow> rows;
    rows.reserve(cells.size());
    for (std::size_t in = 0; in < config.ns.size(); ++in) {
        for (std::size_t im = 0; im < config.ms.size(); ++im) {
            for (std::size_t ip = 0; ip < pairs.size(); ++ip) {
                const CellAccumulator& acc = cells[in * per_n + im * pairs.size() + ip];
                StudyRow row;
                row.scenario = config.scenario;
                row.n = config.ns[in];
                row.m = config.ms[im];
                row.r = pairs[ip].r;
                row.k = pairs[ip].k;
                row.replications = config.replications;
                row.failed_replications = acc.failed;
                row.status = acc.status;
                row.runtime_ms = config.timing ? 1000.0 * acc.seconds : 0.0;
                if (!acc.mse.empty()) {
                    double total = 0.0;
                    for (double v : acc.mse) total += v;
                    row.rmse_sum = std::sqrt(total);
                    row.rmse_mean =
                        std::sqrt(total / static_cast<double>(acc.mse.size()) / row.n);
                    row.best_lambda_median = median(acc.best_lambda);
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

namespace {

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string optional_number(const std::optional<double>& v) { return v ? number(*v) : ""; }

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
    out << "scenario,n,m,r,k,replications,rmse_sum,rmse_mean,best_lambda_median,runtime_ms\n";
    for (const auto& row : rows) {
        out << to_string(row.scenario) << ',' << row.n << ',' << row.m << ',' << row.r << ','
            << row.k << ',' << row.replications << ',' << optional_number(row.rmse_sum) << ','
            << optional_number(row.rmse_mean) << ',' << optional_number(row.best_lambda_median)
            << ',' << number(row.runtime_ms) << '\n';
    }
}

nlohmann::json study_to_json(const std::vector<StudyRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json rec = {
            {"scenario", to_string(row.scenario)},
            {"n", row.n},
            {"m", row.m},
            {"r", row.r},
            {"k", row.k},
            {"replications", row.replications},
            {"rmse_sum", optional_json(row.rmse_sum)},
            {"rmse_mean", optional_json(row.rmse_mean)},
            {"best_lambda_median", optional_json(row.best_lambda_median)},
            {"runtime_ms", row.runtime_ms},
            {"failed_replications", row.failed_replications},
            {"status", row.status},
        };
        if (row.scenario == Scenario::BivariateExp) rec["mesh_dims"] = {row.m, row.m};
        out.push_back(std::move(rec));
    }
    return out;
}

StudyConfig study_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorCode::SchemaMismatch, "study config must be a JSON object");
    static const std::vector<std::string> known = {
        "scenario", "ns", "ms", "rk_pairs", "replications", "lambda_count", "lambda_min",
        "seed", "noise_sd", "timing", "solver"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            fail(ErrorCode::SchemaMismatch, "unknown study config key '" + key + "'");
        }
    }
    StudyConfig c;
    try {
        if (j.contains("scenario")) c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        if (j.contains("ns")) c.ns = j.at("ns").get<std::vector<int>>();
        if (j.contains("ms")) c.ms = j.at("ms").get<std::vector<int>>();
        if (j.contains("rk_pairs")) {
            for (const auto& p : j.at("rk_pairs")) {
                if (!p.is_array() || p.size() != 2) {
                    fail(ErrorCode::SchemaMismatch, "rk_pairs entries must be [r, k]");
                }
                c.rk_pairs.push_back({p[0].get<int>(), p[1].get<int>()});
            }
        }
        if (j.contains("replications")) c.replications = j.at("replications").get<int>();
        if (j.contains("lambda_count")) c.lambda_count = j.at("lambda_count").get<int>();
        if (j.contains("lambda_min")) c.lambda_min = j.at("lambda_min").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("noise_sd")) c.noise_sd = j.at("noise_sd").get<double>();
        if (j.contains("timing")) c.timing = j.at("timing").get<bool>();
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            static const std::vector<std::string> solver_keys = {
                "rho", "max_iter", "tol_abs", "tol_rel", "polish", "certify_tol", "adapt_rho"};
            if (!s.is_object()) fail(ErrorCode::SchemaMismatch, "study config 'solver' must be an object");
            for (const auto& [key, _] : s.items()) {
                if (std::find(solver_keys.begin(), solver_keys.end(), key) == solver_keys.end()) {
                    fail(ErrorCode::SchemaMismatch, "unknown solver key '" + key + "'");
                }
            }
            if (s.contains("rho") && !s.at("rho").is_null()) c.solver.rho = s.at("rho").get<double>();
            if (s.contains("max_iter")) c.solver.max_iter = s.at("max_iter").get<int>();
            if (s.contains("tol_abs")) c.solver.tol_abs = s.at("tol_abs").get<double>();
            if (s.contains("tol_rel")) c.solver.tol_rel = s.at("tol_rel").get<double>();
            if (s.contains("polish")) c.solver.polish = s.at("polish").get<bool>();
            if (s.contains("certify_tol")) c.solver.certify_tol = s.at("certify_tol").get<double>();
            if (s.contains("adapt_rho")) c.solver.adapt_rho = s.at("adapt_rho").get<bool>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string("study config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json study_config_to_json(const StudyConfig& c) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : c.rk_pairs) pairs.push_back({p.r, p.k});
    return {
        {"scenario", to_string(c.scenario)},
        {"ns", c.ns},
        {"ms", c.ms},
        {"rk_pairs", pairs},
        {"replications", c.replications},
        {"lambda_count", c.lambda_count},
        {"lambda_min", c.lambda_min},
        {"seed", c.seed},
        {"noise_sd", c.noise_sd},
        {"timing", c.timing},
        {"solver",
         {{"rho", c.solver.rho ? nlohmann::json(*c.solver.rho) : nlohmann::json(nullptr)},
          {"max_iter", c.solver.max_iter},
          {"tol_abs", c.solver.tol_abs},
          {"tol_rel", c.solver.tol_rel},
          {"polish", c.solver.polish},
          {"certify_tol", c.solver.certify_tol},
          {"adapt_rho", c.solver.adapt_rho}}},
    };
}

}  // namespace mbs
