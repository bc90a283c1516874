#include "mbs/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mbs/csv.hpp"
#include "mbs/diffops.hpp"
#include "mbs/error.hpp"
#include "mbs/interp.hpp"
#include "mbs/mesh.hpp"
#include "mbs/simulate.hpp"

namespace mbs {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::vector<int>> parse_orders(const std::string& text) {
    std::vector<std::vector<int>> out;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        std::vector<int> index;
        std::stringstream parts(group);
        std::string part;
        while (std::getline(parts, part, ',')) {
            try {
                std::size_t used = 0;
                index.push_back(std::stoi(part, &used));
                const auto rest = part.find_first_not_of(" \t", used);
                require(rest == std::string::npos, "bad order entry '" + part + "'");
            } catch (const std::logic_error&) {
                fail(ErrorCode::InvalidArgument, "bad order entry '" + part + "' in '" + text + "'");
            }
        }
        require(!index.empty(), "empty multi-index in '" + text + "'");
        out.push_back(std::move(index));
    }
    require(!out.empty(), "no multi-indices in '" + text + "'");
    return out;
}

namespace {

void set_lambda(FitRequest& req, const json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "path") {
            req.lambda_path = true;
            req.lambda.reset();
            return;
        }
        try {
            std::size_t used = 0;
            const double l = std::stod(s, &used);
            require(used == s.size(), "lambda must be a number or \"path\"");
            req.lambda = l;
        } catch (const std::logic_error&) {
            fail(ErrorCode::InvalidArgument, "lambda must be a number or \"path\", got '" + s + "'");
        }
    } else {
        req.lambda = v.get<double>();
    }
    req.lambda_path = false;
}

}  // namespace

void apply_fit_config(FitRequest& req, const json& j) {
    if (!j.is_object()) fail(ErrorCode::SchemaMismatch, "fit config must be a JSON object");
    static const std::vector<std::string> known = {
        "input", "output", "response", "covariates", "mesh_size", "order_r", "orders", "order_k",
        "ell", "lambda", "path_count", "path_min", "rho", "max_iter", "tol", "tol_abs", "tol_rel",
        "polish", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            fail(ErrorCode::SchemaMismatch, "unknown fit config key '" + key + "'");
        }
    }
    try {
        if (j.contains("input")) req.input = j["input"].get<std::string>();
        if (j.contains("output")) req.output = j["output"].get<std::string>();
        if (j.contains("response")) req.response = j["response"].get<std::string>();
        if (j.contains("covariates")) {
            const auto& c = j["covariates"];
            req.covariates = c.is_string() ? std::vector<std::string>{c.get<std::string>()}
                                           : c.get<std::vector<std::string>>();
        }
        if (j.contains("mesh_size")) {
            const auto& m = j["mesh_size"];
            req.mesh_size = m.is_number() ? std::vector<int>{m.get<int>()} : m.get<std::vector<int>>();
        }
        if (j.contains("order_r")) req.order_r = j["order_r"].get<int>();
        if (j.contains("orders")) {
            const auto& o = j["orders"];
            req.orders = o.is_string() ? parse_orders(o.get<std::string>())
                                       : o.get<std::vector<std::vector<int>>>();
        }
        if (j.contains("order_k")) req.order_k = j["order_k"].get<int>();
        if (j.contains("ell")) req.ell = j["ell"].get<double>();
        if (j.contains("lambda")) set_lambda(req, j["lambda"]);
        if (j.contains("path_count")) req.path_count = j["path_count"].get<int>();
        if (j.contains("path_min")) req.path_min = j["path_min"].get<double>();
        if (j.contains("rho")) {
            if (j["rho"].is_null()) {
                req.solver.rho.reset();
            } else {
                req.solver.rho = j["rho"].get<double>();
            }
        }
        if (j.contains("max_iter")) req.solver.max_iter = j["max_iter"].get<int>();
        if (j.contains("tol")) req.solver.tol_rel = j["tol"].get<double>();
        if (j.contains("tol_abs")) req.solver.tol_abs = j["tol_abs"].get<double>();
        if (j.contains("tol_rel")) req.solver.tol_rel = j["tol_rel"].get<double>();
        if (j.contains("polish")) req.solver.polish = j["polish"].get<bool>();
        if (j.contains("seed")) req.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string("fit config: ") + e.what());
    }
}

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::SchemaMismatch, "config '" + path + "' is not valid JSON: " + e.what());
    }
}

struct FitModel {
    TensorMesh mesh;
    PenaltySpec spec;
    SparseBandedMatrix interp;
    SparseBandedMatrix penalty;
    std::vector<std::vector<double>> covariates;
    Vector y;
};

FitModel build_model(const FitRequest& req) {
    require(!req.input.empty(), "no input file given (--input)");
    require(!req.output.empty(), "no output directory given (--output)");
    require(!req.response.empty(), "no response column given (--response)");
    require(!req.covariates.empty(), "no covariate columns given (--covariates)");
    require(req.ell >= 1.0, "ell must be >= 1");
    if (req.ell != 1.0) {
        fail(ErrorCode::InvalidArgument, "the solver supports ell = 1 only");
    }

    const CsvTable table = read_csv(req.input);
    require(table.rows() >= 1, "input has no data rows");
    const std::size_t p = req.covariates.size();

    std::vector<int> dims = req.mesh_size;
    if (dims.size() == 1 && p > 1) dims.assign(p, dims.front());
    require(dims.size() == p, "need one --mesh-size per covariate (or a single shared value)");

    PenaltySpec spec;
    spec.ell = req.ell;
    if (!req.orders.empty()) {
        spec.orders = req.orders;
    } else if (req.order_r && p == 1) {
        spec = PenaltySpec::univariate(*req.order_r, req.ell);
    } else if (p == 1) {
        fail(ErrorCode::InvalidArgument, "univariate fits need --order-r (or --orders)");
    } else {
        fail(ErrorCode::InvalidArgument, "multivariate fits need --orders");
    }
    require(spec.dimension() == p, "each multi-index needs one entry per covariate");
    spec.validate();
    require(req.order_k >= 0, "k must be >= 0");
    if (req.order_k > spec.max_interpolation_order()) {
        fail(ErrorCode::InvalidArgument,
             p == 1 ? "interpolation order k must not exceed r"
                    : "interpolation order k must not exceed the largest isotropic order");
    }

    FitModel model{TensorMesh({Mesh::regular(0.0, 1.0, 2)}), spec, {}, {}, {}, {}};
    std::vector<Mesh> axes;
    for (std::size_t j = 0; j < p; ++j) {
        const auto& x = table.column(req.covariates[j]);
        model.covariates.push_back(x);
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        require(*hi > *lo, "covariate '" + req.covariates[j] + "' is constant");
        require(dims[j] >= 2, "mesh sizes must be >= 2");
        axes.push_back(Mesh::regular(*lo, *hi, static_cast<std::size_t>(dims[j])));
    }
    model.mesh = TensorMesh(std::move(axes));
    const auto& resp = table.column(req.response);
    model.y = Eigen::Map<const Vector>(resp.data(), static_cast<Index>(resp.size()));

    if (p == 1) {
        model.interp = mlp_matrix(model.covariates[0], model.mesh.axis(0), req.order_k).matrix;
    } else {
        DenseMatrix pts(static_cast<Index>(table.rows()), static_cast<Index>(p));
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t i = 0; i < table.rows(); ++i) {
                pts(static_cast<Index>(i), static_cast<Index>(j)) = model.covariates[j][i];
            }
        }
        model.interp = mlp_matrix_multivariate(pts, model.mesh, req.order_k).matrix;
    }
    model.penalty = penalty_operator(model.mesh, spec);
    return model;
}

void write_mesh_csv(const std::string& path, const FitRequest& req, const FitModel& model,
                    const Vector& f) {
    const std::size_t p = model.mesh.dimension();
    const std::size_t total = model.mesh.grid_size();
    std::vector<std::vector<double>> cols(p + 1, std::vector<double>(total));
    for (std::size_t lin = 0; lin < total; ++lin) {
        const auto idx = model.mesh.multi_index(lin);
        for (std::size_t j = 0; j < p; ++j) cols[j][lin] = model.mesh.axis(j).point(idx[j]);
        cols[p][lin] = f[static_cast<Index>(lin)];
    }
    std::vector<std::string> names = req.covariates;
    names.push_back("value");
    write_csv(path, names, cols);
}

std::string format_summary(const json& j) { return j.dump(); }

}  // namespace

int run_fit(const FitRequest& req, std::ostream& out, std::ostream& err) {
    try {
        const FitModel model = build_model(req);
        fs::create_directories(req.output);
        const fs::path dir(req.output);

        if (req.lambda_path) {
            MBSProblem prob{model.y, model.interp, model.penalty, 0.0,
                            penalty_null_space(model.mesh, model.spec)};
            const double lmax = lambda_max(prob);
            require(lmax > req.path_min,
                    "lambda_max does not exceed the path minimum; the fit is already in the penalty null space");
            const auto lambdas = lambda_grid(lmax, req.path_count, req.path_min);
            AdmmSolver solver(model.interp, model.penalty, model.y, req.solver);
            std::vector<std::vector<double>> index(7);
            bool all_converged = true;
            FitResult last;
            double last_kkt = 0.0;
            for (std::size_t i = 0; i < lambdas.size(); ++i) {
                last = solver.solve(lambdas[i]);
                prob.lambda = lambdas[i];
                last_kkt = kkt_residual(last.coefficients, prob);
                all_converged = all_converged && last.converged;
                char name[32];
                std::snprintf(name, sizeof name, "mesh_%03zu.csv", i);
                write_mesh_csv((dir / name).string(), req, model, last.coefficients);
                index[0].push_back(static_cast<double>(i));
                index[1].push_back(lambdas[i]);
                index[2].push_back(last.objective);
                index[3].push_back(model.penalty.apply(last.coefficients).lpNorm<1>());
                index[4].push_back(last.iterations);
                index[5].push_back(last.converged ? 1.0 : 0.0);
                index[6].push_back(last_kkt);
            }
            write_csv((dir / "lambda_path.csv").string(),
                      {"index", "lambda", "objective", "penalty", "iterations", "converged", "kkt"},
                      index);
            out << format_summary({{"objective", last.objective},
                                   {"iterations", last.iterations},
                                   {"kkt", last_kkt},
                                   {"converged", all_converged},
                                   {"lambda_count", lambdas.size()}})
                << '\n';
            return all_converged ? kExitOk : kExitMaxIterations;
        }

        const double lambda = req.lambda.value_or(0.0);
        const MBSProblem prob{model.y, model.interp, model.penalty, lambda, {}};
        const FitResult fit = admm_solve(prob, req.solver);
        const double kkt = kkt_residual(fit.coefficients, prob);

        std::vector<std::vector<double>> cols = model.covariates;
        cols.emplace_back(model.y.data(), model.y.data() + model.y.size());
        cols.emplace_back(fit.fitted.data(), fit.fitted.data() + fit.fitted.size());
        std::vector<std::string> names = req.covariates;
        names.push_back(req.response);
        names.push_back("fitted");
        write_csv((dir / "fitted.csv").string(), names, cols);
        write_mesh_csv((dir / "mesh.csv").string(), req, model, fit.coefficients);

        out << format_summary({{"objective", fit.objective},
                               {"iterations", fit.iterations},
                               {"kkt", kkt},
                               {"converged", fit.converged}})
            << '\n';
        return fit.converged ? kExitOk : kExitMaxIterations;
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return kExitInputError;
    } catch (const fs::filesystem_error& e) {
        err << "error [io]: " << e.what() << '\n';
        return kExitInputError;
    }
}

int run_simulate(const std::string& config_path, const std::string& output,
                 std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err) {
    try {
        require(!output.empty(), "no output directory given (--output)");
        StudyConfig config = study_config_from_json(load_json(config_path));
        if (seed) config.seed = *seed;
        const json resolved = study_config_to_json(config);
        out << resolved.dump() << '\n';

        const auto rows = run_rmse_study(config);
        fs::create_directories(output);
        const fs::path dir(output);
        {
            std::ofstream csv(dir / "study.csv", std::ios::binary);
            if (!csv) fail(ErrorCode::Io, "cannot write study.csv in '" + output + "'");
            write_study_csv(csv, rows);
        }
        {
            std::ofstream js(dir / "study.json", std::ios::binary);
            if (!js) fail(ErrorCode::Io, "cannot write study.json in '" + output + "'");
            js << json{{"config", resolved}, {"rows", study_to_json(rows)}}.dump(2) << '\n';
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return kExitInputError;
    } catch (const fs::filesystem_error& e) {
        err << "error [io]: " << e.what() << '\n';
        return kExitInputError;
    }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mesh-based penalized regression"};
    app.require_subcommand(1);

    FitRequest flags;
    std::string config_path, orders_text, lambda_text;
    double tol = 0.0;
    double rho = 0.0;
    auto* fit = app.add_subcommand("fit", "Fit a dataset from CSV");
    auto* o_input = fit->add_option("--input", flags.input, "Input CSV file");
    auto* o_output = fit->add_option("--output", flags.output, "Output directory");
    auto* o_response = fit->add_option("--response", flags.response, "Response column");
    auto* o_cov = fit->add_option("--covariates", flags.covariates, "Covariate column(s)")
                      ->delimiter(',');
    auto* o_mesh = fit->add_option("--mesh-size", flags.mesh_size, "Mesh size per axis")
                       ->delimiter(',');
    auto* o_r = fit->add_option("--order-r", flags.order_r, "Univariate smoothness r");
    auto* o_orders =
        fit->add_option("--orders", orders_text, "Difference multi-indices, e.g. 1,1;1,0;0,1");
    auto* o_k = fit->add_option("--order-k", flags.order_k, "Interpolation order k");
    auto* o_ell = fit->add_option("--ell", flags.ell, "Penalty norm order (1 for fitting)");
    auto* o_lambda = fit->add_option("--lambda", lambda_text, "Penalty weight or \"path\"");
    auto* o_count = fit->add_option("--path-count", flags.path_count, "Number of path values");
    auto* o_pmin = fit->add_option("--path-min", flags.path_min, "Smallest path value");
    auto* o_rho = fit->add_option("--rho", rho, "ADMM penalty parameter");
    auto* o_iter = fit->add_option("--max-iter", flags.solver.max_iter, "ADMM iteration limit");
    auto* o_tol = fit->add_option("--tol", tol, "Relative stopping tolerance");
    auto* o_seed = fit->add_option("--seed", flags.seed, "Random seed");
    fit->add_option("--config", config_path, "JSON configuration; flags take precedence");

    std::string sim_config, sim_output;
    std::uint64_t sim_seed = 0;
    auto* sim = app.add_subcommand("simulate", "Run a simulation study");
    sim->add_option("--config", sim_config, "Study configuration (JSON)")->required();
    sim->add_option("--output", sim_output, "Output directory")->required();
    auto* o_sim_seed = sim->add_option("--seed", sim_seed, "Override the config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        app.exit(e, msg, msg);
        err << msg.str();
        return e.get_exit_code() == 0 ? kExitOk : kExitInputError;
    }

    if (sim->parsed()) {
        std::optional<std::uint64_t> seed;
        if (o_sim_seed->count() > 0) seed = sim_seed;
        return run_simulate(sim_config, sim_output, seed, out, err);
    }

    FitRequest req;
    try {
        if (!config_path.empty()) apply_fit_config(req, load_json(config_path));
        if (o_input->count()) req.input = flags.input;
        if (o_output->count()) req.output = flags.output;
        if (o_response->count()) req.response = flags.response;
        if (o_cov->count()) req.covariates = flags.covariates;
        if (o_mesh->count()) req.mesh_size = flags.mesh_size;
        if (o_r->count()) req.order_r = flags.order_r;
        if (o_orders->count()) req.orders = parse_orders(orders_text);
        if (o_k->count()) req.order_k = flags.order_k;
        if (o_ell->count()) req.ell = flags.ell;
        if (o_lambda->count()) set_lambda(req, json(lambda_text));
        if (o_count->count()) req.path_count = flags.path_count;
        if (o_pmin->count()) req.path_min = flags.path_min;
        if (o_rho->count()) req.solver.rho = rho;
        if (o_iter->count()) req.solver.max_iter = flags.solver.max_iter;
        if (o_tol->count()) req.solver.tol_rel = tol;
        if (o_seed->count()) req.seed = flags.seed;
        req.solver.validate();
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return kExitInputError;
    }
    return run_fit(req, out, err);
}

}  // namespace mbs
