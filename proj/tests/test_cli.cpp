#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "mbs/cli.hpp"
#include "mbs/csv.hpp"
#include "mbs/error.hpp"
#include "mbs/interp.hpp"

using namespace mbs;
namespace fs = std::filesystem;

namespace {

const std::string kData = MBS_TEST_DATA_DIR;

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "mbs");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("mbs_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<double> unique_sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

TEST_CASE("orders parsing") {
    const auto o = parse_orders("1,1;1,0;0,1");
    REQUIRE(o.size() == 3);
    CHECK(o[0] == std::vector<int>{1, 1});
    CHECK(o[2] == std::vector<int>{0, 1});
    CHECK_THROWS_AS(parse_orders("1,x"), Error);
    CHECK_THROWS_AS(parse_orders(""), Error);
}

TEST_CASE("unpenalized fit on a mesh at the data reproduces y") {
    const auto dir = scratch("identity");
    const auto r = run({"fit", "--input", kData + "/five.csv", "--output", dir.string(), "--response", "y",
                        "--covariates", "x", "--mesh-size", "5", "--order-r", "0", "--order-k", "0",
                        "--lambda", "0"});
    REQUIRE(r.code == kExitOk);
    const auto summary = nlohmann::json::parse(r.out);
    CHECK(summary.contains("objective"));
    CHECK(summary.contains("iterations"));
    CHECK(summary.contains("kkt"));
    CHECK(summary["converged"] == true);
    const auto fitted = read_csv((dir / "fitted.csv").string());
    CHECK(fitted.columns == std::vector<std::string>{"x", "y", "fitted"});
    for (std::size_t i = 0; i < fitted.rows(); ++i)
        CHECK(std::abs(fitted.column("fitted")[i] - fitted.column("y")[i]) <= 1e-6);
    const auto mesh = read_csv((dir / "mesh.csv").string());
    CHECK(mesh.columns == std::vector<std::string>{"x", "value"});
    CHECK(mesh.rows() == 5);
}

TEST_CASE("missing response column names the column") {
    const auto dir = scratch("missing");
    const auto r = run({"fit", "--input", kData + "/five.csv", "--output", dir.string(), "--response", "nope",
                        "--covariates", "x", "--mesh-size", "5", "--order-r", "0", "--lambda", "1"});
    CHECK(r.code == kExitInputError);
    CHECK(r.err.find("nope") != std::string::npos);
}

TEST_CASE("input errors have distinct messages") {
    const auto dir = scratch("errors");
    std::set<std::string> messages;
    for (const std::string file : {"does_not_exist.csv", "nonnumeric.csv", "ragged.csv", "nonfinite.csv"}) {
        const auto r = run({"fit", "--input", kData + "/" + file, "--output", dir.string(), "--response", "y",
                            "--covariates", "x", "--mesh-size", "5", "--order-r", "0", "--lambda", "1"});
        CAPTURE(file);
        CHECK(r.code == kExitInputError);
        CHECK_FALSE(r.err.empty());
        messages.insert(r.err);
    }
    CHECK(messages.size() == 4);
}

TEST_CASE("order rules are validated before solving") {
    const auto dir = scratch("rules");
    const auto k_too_big = run({"fit", "--input", kData + "/sine.csv", "--output", dir.string(), "--response", "y",
                                "--covariates", "x", "--mesh-size", "10", "--order-r", "1", "--order-k", "2",
                                "--lambda", "1"});
    CHECK(k_too_big.code == kExitInputError);
    const auto ell = run({"fit", "--input", kData + "/sine.csv", "--output", dir.string(), "--response", "y",
                          "--covariates", "x", "--mesh-size", "10", "--order-r", "1", "--ell", "2",
                          "--lambda", "1"});
    CHECK(ell.code == kExitInputError);
    const auto biv = run({"fit", "--input", kData + "/bivariate.csv", "--output", dir.string(), "--response",
                          "z", "--covariates", "x1", "--covariates", "x2", "--mesh-size", "6", "--mesh-size", "6",
                          "--orders", "1,0;0,1", "--order-k", "1", "--lambda", "1"});
    CHECK(biv.code == kExitInputError);
}

TEST_CASE("mesh csv round-trips through interpolation") {
    const auto dir = scratch("roundtrip");
    const auto r = run({"fit", "--input", kData + "/sine.csv", "--output", dir.string(), "--response", "y",
                        "--covariates", "x", "--mesh-size", "15", "--order-r", "2", "--order-k", "2",
                        "--lambda", "0.5"});
    REQUIRE(r.code == kExitOk);
    const auto mesh_csv = read_csv((dir / "mesh.csv").string());
    const auto fitted = read_csv((dir / "fitted.csv").string());
    const auto mesh = Mesh::from_points(mesh_csv.column("x"));
    const auto& values = mesh_csv.column("value");
    const Vector f = Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    const Vector v = mlp_matrix(fitted.column("x"), mesh, 2).matrix.apply(f);
    for (std::size_t i = 0; i < fitted.rows(); ++i)
        CHECK(std::abs(v(static_cast<Index>(i)) - fitted.column("fitted")[i]) <= 1e-9);
}

TEST_CASE("bivariate mesh csv round-trips through interpolation") {
    const auto dir = scratch("roundtrip2");
    const auto r = run({"fit", "--input", kData + "/bivariate.csv", "--output", dir.string(), "--response", "z",
                        "--covariates", "x1", "--covariates", "x2", "--mesh-size", "6", "--mesh-size", "5",
                        "--orders", "1,1;1,0;0,1", "--order-k", "1", "--lambda", "0.2"});
    REQUIRE(r.code == kExitOk);
    const auto mesh_csv = read_csv((dir / "mesh.csv").string());
    CHECK(mesh_csv.columns == std::vector<std::string>{"x1", "x2", "value"});
    REQUIRE(mesh_csv.rows() == 30);
    const auto fitted = read_csv((dir / "fitted.csv").string());
    const TensorMesh mesh({Mesh::from_points(unique_sorted(mesh_csv.column("x1"))),
                           Mesh::from_points(unique_sorted(mesh_csv.column("x2")))});
    DenseMatrix x(static_cast<Index>(fitted.rows()), 2);
    for (std::size_t i = 0; i < fitted.rows(); ++i) {
        x(static_cast<Index>(i), 0) = fitted.column("x1")[i];
        x(static_cast<Index>(i), 1) = fitted.column("x2")[i];
    }
    const auto& values = mesh_csv.column("value");
    const Vector f = Eigen::Map<const Vector>(values.data(), 30);
    const Vector v = mlp_matrix_multivariate(x, mesh, 1).matrix.apply(f);
    for (std::size_t i = 0; i < fitted.rows(); ++i)
        CHECK(std::abs(v(static_cast<Index>(i)) - fitted.column("fitted")[i]) <= 1e-9);
}

TEST_CASE("lambda path writes one mesh per value and an index") {
    const auto dir = scratch("path");
    const auto r = run({"fit", "--input", kData + "/sine.csv", "--output", dir.string(), "--response", "y",
                        "--covariates", "x", "--mesh-size", "20", "--order-r", "1", "--order-k", "1",
                        "--lambda", "path", "--path-count", "15"});
    REQUIRE(r.code == kExitOk);
    CHECK(nlohmann::json::parse(r.out)["lambda_count"] == 15);
    const auto index = read_csv((dir / "lambda_path.csv").string());
    REQUIRE(index.rows() == 15);
    const auto& lambdas = index.column("lambda");
    const auto& penalty = index.column("penalty");
    for (std::size_t i = 0; i < 15; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "mesh_%03zu.csv", i);
        CHECK(fs::exists(dir / name));
        CHECK(index.column("converged")[i] == 1.0);
        if (i > 0) {
            CHECK(lambdas[i] < lambdas[i - 1]);
            CHECK(penalty[i] >= penalty[i - 1] - 1e-9 * (1.0 + penalty[i - 1]));
        }
    }
}

TEST_CASE("iteration cap exits with status 2") {
    const auto dir = scratch("cap");
    const auto r = run({"fit", "--input", kData + "/sine.csv", "--output", dir.string(), "--response", "y",
                        "--covariates", "x", "--mesh-size", "30", "--order-r", "1", "--order-k", "1",
                        "--lambda", "0.05", "--max-iter", "1"});
    CHECK(r.code == kExitMaxIterations);
    CHECK(nlohmann::json::parse(r.out)["converged"] == false);
}

TEST_CASE("config file values are overridden by flags") {
    const auto dir = scratch("config");
    fs::create_directories(dir);
    const auto cfg = dir / "fit.json";
    std::ofstream(cfg) << R"({"input": ")" << kData << R"(/sine.csv", "response": "y", "covariates": ["x"],
        "mesh_size": [12], "order_r": 1, "order_k": 1, "lambda": 1000.0})";
    const auto from_config = run({"fit", "--config", cfg.string(), "--output", (dir / "a").string()});
    REQUIRE(from_config.code == kExitOk);
    const auto overridden =
        run({"fit", "--config", cfg.string(), "--output", (dir / "b").string(), "--lambda", "0.01"});
    REQUIRE(overridden.code == kExitOk);
    const double big = nlohmann::json::parse(from_config.out)["objective"];
    const double small = nlohmann::json::parse(overridden.out)["objective"];
    CHECK(small < big);
    const auto bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK(run({"fit", "--config", bad.string(), "--output", (dir / "c").string()}).code == kExitInputError);
}

TEST_CASE("simulate writes the study and echoes the resolved config") {
    const auto dir = scratch("simulate");
    fs::create_directories(dir);
    const auto cfg = dir / "study.json";
    std::ofstream(cfg) << R"({"scenario":"univariate-exp","ns":[40],"ms":[4,8],"rk_pairs":[[0,0]],)"
                       << R"("replications":2,"seed":7,"timing":false})";
    const auto a = run({"simulate", "--config", cfg.string(), "--output", (dir / "a").string()});
    REQUIRE(a.code == kExitOk);
    const auto echoed = nlohmann::json::parse(a.out.substr(0, a.out.find('\n')));
    CHECK(echoed["lambda_count"] == 50);
    CHECK(echoed["seed"] == 7);
    std::istringstream lines(slurp(dir / "a" / "study.csv"));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 3);
    const auto b = run({"simulate", "--config", cfg.string(), "--output", (dir / "b").string()});
    REQUIRE(b.code == kExitOk);
    CHECK(slurp(dir / "a" / "study.csv") == slurp(dir / "b" / "study.csv"));
    CHECK(slurp(dir / "a" / "study.json") == slurp(dir / "b" / "study.json"));
    const auto c = run({"simulate", "--config", cfg.string(), "--output", (dir / "c").string(), "--seed", "8"});
    REQUIRE(c.code == kExitOk);
    CHECK(slurp(dir / "a" / "study.csv") != slurp(dir / "c" / "study.csv"));
}

TEST_CASE("bivariate simulate tags rows with the mesh dims") {
    const auto dir = scratch("simulate2");
    fs::create_directories(dir);
    const auto cfg = dir / "study.json";
    std::ofstream(cfg) << R"({"scenario":"bivariate-exp","ns":[200],"ms":[4,15],"replications":1,)"
                       << R"("lambda_count":8,"seed":2,"timing":false})";
    const auto r = run({"simulate", "--config", cfg.string(), "--output", dir.string()});
    REQUIRE(r.code == kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / "study.json"));
    REQUIRE(j["rows"].size() == 2);
    CHECK(j["rows"][0]["scenario"] == "bivariate-exp");
    CHECK(j["rows"][1]["mesh_dims"] == nlohmann::json::array({15, 15}));
}

TEST_CASE("bad simulate config exits with status 1") {
    const auto dir = scratch("simulate3");
    fs::create_directories(dir);
    const auto cfg = dir / "study.json";
    std::ofstream(cfg) << R"({"scenario":"univariate-exp","ns":[40],"ms":[4],"rk_pairs":[[0,1]]})";
    CHECK(run({"simulate", "--config", cfg.string(), "--output", dir.string()}).code == kExitInputError);
    CHECK(run({"simulate", "--config", (dir / "missing.json").string(), "--output", dir.string()}).code ==
          kExitInputError);
}

TEST_CASE("installed binary reports exit statuses") {
    const auto dir = scratch("binary");
    const std::string base = std::string(MBS_CLI_PATH) + " fit --input " + kData + "/five.csv --output " +
                             dir.string() + " --covariates x --mesh-size 5 --order-r 0 --lambda 0 ";
    const int ok = std::system((base + "--response y > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(ok) == 0);
    const int missing = std::system((base + "--response nope > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(missing) == 1);
}
