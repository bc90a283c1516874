#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "mbs/diffops.hpp"
#include "mbs/error.hpp"
#include "mbs/interp.hpp"
#include "mbs/solver.hpp"
#include "support/instances.hpp"

using namespace mbs;
using mbs::testing::kkt_scale;
using mbs::testing::random_instance;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

MBSProblem identity_problem(const Vector& y, int r, double lambda) {
    const auto mesh = Mesh::regular(0.0, 1.0, static_cast<std::size_t>(y.size()));
    MBSProblem p;
    p.y = y;
    p.interp = SparseBandedMatrix::identity(y.size());
    p.penalty = normalized_difference_matrix(mesh, r, 1.0);
    p.lambda = lambda;
    return p;
}

}  // namespace

TEST_CASE("soft threshold") {
    CHECK(soft_threshold(vec({2.5}), 1.0)(0) == 1.5);
    CHECK(soft_threshold(vec({-0.5}), 1.0)(0) == 0.0);
    CHECK(soft_threshold(vec({-3.0}), 1.0)(0) == -2.0);
    const Vector z = vec({1.0, -2.0, 0.0, 3.5});
    CHECK(soft_threshold(z, 0.0) == z);
    CHECK_THROWS_AS(soft_threshold(z, -1.0), Error);
}

TEST_CASE("lambda grid") {
    const auto g = lambda_grid(100.0, 3, 1.0);
    REQUIRE(g.size() == 3);
    CHECK(g[0] == 100.0);
    CHECK(g[1] == doctest::Approx(10.0));
    CHECK(g[2] == 1.0);
    const auto two = lambda_grid(1.0, 2, 1e-3);
    CHECK(two[0] == 1.0);
    CHECK(two[1] == 1e-3);
    const auto fifty = lambda_grid(37.5, 50, 1e-3);
    REQUIRE(fifty.size() == 50);
    CHECK(fifty.front() == 37.5);
    CHECK(fifty.back() == 1e-3);
    for (std::size_t i = 1; i < fifty.size(); ++i) {
        CHECK(fifty[i] < fifty[i - 1]);
        CHECK(fifty[i] / fifty[i - 1] == doctest::Approx(fifty[1] / fifty[0]));
    }
    CHECK_THROWS_AS(lambda_grid(1.0, 3, 2.0), Error);
    CHECK_THROWS_AS(lambda_grid(1.0, 1, 0.1), Error);
    CHECK_THROWS_AS(lambda_grid(1.0, 3, 0.0), Error);
}

TEST_CASE("unpenalized fit with identity interpolation reproduces y") {
    const Vector y = vec({0.3, -1.0, 2.0, 0.5, 0.7});
    const auto fit = admm_solve(identity_problem(y, 1, 0.0));
    CHECK((fit.coefficients - y).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(fit.converged);
}

TEST_CASE("large lambda fused lasso gives the mean") {
    const Vector y = vec({0.3, -1.0, 2.0, 0.5, 0.7, 1.1});
    auto p = identity_problem(y, 0, 0.0);
    p.lambda = 2.0 * lambda_max(p);
    const auto fit = admm_solve(p);
    CHECK((fit.fitted.array() - y.mean()).abs().maxCoeff() <= 1e-6);
    CHECK(kkt_residual(fit.coefficients, p) <= 1e-6);
}

TEST_CASE("step fused lasso instance is certified by the kkt residual") {
    auto p = identity_problem(vec({0, 0, 0, 1, 1, 1}), 0, 0.4);
    // Unit bin widths so the penalty is the plain fused lasso.
    p.penalty = difference_matrix(6, 1);
    const auto fit = admm_solve(p);
    CHECK(fit.converged);
    CHECK(kkt_residual(fit.coefficients, p) <= 1e-6);
    // Closed form: the jump shrinks by lambda / 3 on each side (2 * 3 * shift = lambda).
    const double shift = 0.4 / 6.0;
    for (Index i = 0; i < 3; ++i) {
        CHECK(fit.coefficients(i) == doctest::Approx(shift).epsilon(1e-6));
        CHECK(fit.coefficients(i + 3) == doctest::Approx(1.0 - shift).epsilon(1e-6));
    }
}

TEST_CASE("kkt residual examples") {
    std::mt19937_64 rng(31);
    auto inst = random_instance(rng);
    auto& p = inst.problem;
    p.lambda = 0.0;
    const DenseMatrix o = p.interp.to_dense();
    const Vector ls = o.colPivHouseholderQr().solve(p.y);
    if (Eigen::ColPivHouseholderQR<DenseMatrix>(o).rank() == o.cols())
        CHECK(kkt_residual(ls, p) <= 1e-8 * kkt_scale(p));

    auto q = identity_problem(vec({1.0, 3.0, 2.0, 5.0}), 0, 0.0);
    q.lambda = 1.5 * lambda_max(q);
    CHECK(kkt_residual(Vector::Constant(4, 2.75), q) <= 1e-6);

    p.lambda = 0.1 * lambda_max(p);
    const auto fit = admm_solve(p);
    const Vector perturbed = fit.coefficients + 0.05 * Vector::Ones(fit.coefficients.size()) +
                             0.05 * Vector::LinSpaced(fit.coefficients.size(), 0.0, 1.0).array().square().matrix();
    CHECK(kkt_residual(perturbed, p) > 100.0 * kkt_residual(fit.coefficients, p));
    CHECK(kkt_residual(perturbed, p) > 1e-4);
}

TEST_CASE("lambda max examples") {
    CHECK(lambda_max(identity_problem(vec({2.0, 2.0, 2.0, 2.0}), 0, 0.0)) == doctest::Approx(0.0));
    auto p = identity_problem(vec({0.0, 1.0}), 0, 0.0);
    p.penalty = difference_matrix(2, 1);
    CHECK(lambda_max(p) == doctest::Approx(1.0));
}

TEST_CASE("lambda max reports rank deficiency") {
    MBSProblem p;
    p.y = vec({1.0, 2.0, 3.0});
    // Every observation sits on the same mesh point, so a linear trend is unidentifiable.
    const auto mesh = Mesh::regular(0.0, 1.0, 4);
    const std::vector<double> xs{0.0, 0.0, 0.0};
    p.interp = mlp_matrix(xs, mesh, 0).matrix;
    p.penalty = normalized_difference_matrix(mesh, 1, 1.0);
    try {
        lambda_max(p);
        FAIL("expected rank deficiency");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficient);
    }
}

TEST_CASE("optimality on randomized instances") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-3.0, 0.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = random_instance(rng);
        auto& p = inst.problem;
        const double lmax = lambda_max(p);
        p.lambda = lmax * std::pow(10.0, u(rng));
        ADMMOptions opts;
        opts.record_history = true;
        const auto fit = admm_solve(p, opts);
        CAPTURE(trial);
        CAPTURE(inst.r);
        CAPTURE(inst.k);
        CHECK(kkt_residual(fit.coefficients, p) <= 1e-5 * kkt_scale(p));
        // Reported objective is the recomputed one.
        CHECK(fit.objective == doctest::Approx(objective_value(p, fit.coefficients)).epsilon(1e-8));
        CHECK((fit.fitted - p.interp.apply(fit.coefficients)).norm() <= 1e-12 * (1.0 + fit.fitted.norm()));
        double best = fit.objective;
        for (const auto& rec : fit.history) best = std::min(best, rec.objective);
        CHECK(fit.objective <= best * (1.0 + 1e-6) + 1e-12);
    }
}

TEST_CASE("lambda max brackets the null-space solution") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = random_instance(rng);
        auto& p = inst.problem;
        const double lmax = lambda_max(p);
        CAPTURE(trial);
        p.lambda = 1.01 * lmax;
        const auto above = admm_solve(p);
        CHECK(p.penalty.apply(above.coefficients).cwiseAbs().maxCoeff() <= 1e-6);
        const Vector f0 = null_space_fit(p);
        CHECK((above.fitted - p.interp.apply(f0)).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + f0.cwiseAbs().maxCoeff()));
        p.lambda = 0.9 * lmax;
        const auto below = admm_solve(p);
        CHECK(p.penalty.apply(below.coefficients).lpNorm<1>() > 1e-6);
    }
}

TEST_CASE("warm-started path matches cold starts") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 5; ++trial) {
        auto inst = random_instance(rng);
        auto& p = inst.problem;
        const auto grid = lambda_grid(lambda_max(p), 12, 1e-3);
        const auto path = admm_path(p.interp, p.penalty, p.y, grid);
        REQUIRE(path.size() == grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            p.lambda = grid[i];
            const auto cold = admm_solve(p);
            CHECK(path[i].lambda == grid[i]);
            CHECK(kkt_residual(path[i].coefficients, p) <= 1e-5 * kkt_scale(p));
            CHECK(kkt_residual(cold.coefficients, p) <= 1e-5 * kkt_scale(p));
            CHECK(path[i].objective == doctest::Approx(cold.objective).epsilon(1e-6));
        }
    }
}

TEST_CASE("trend filtering as a special case") {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> g;
    for (int r = 0; r <= 2; ++r) {
        auto xs = mbs::testing::sorted_uniform(40, rng);
        const auto mesh = Mesh::from_points(xs);
        MBSProblem p;
        p.y.resize(40);
        for (Index i = 0; i < 40; ++i) p.y(i) = std::exp(xs[static_cast<std::size_t>(i)]) + 0.3 * g(rng);
        p.interp = mlp_matrix(xs, mesh, 0).matrix;
        CHECK((p.interp.to_dense() - DenseMatrix::Identity(40, 40)).norm() == 0.0);
        p.penalty = normalized_difference_matrix(mesh, r, 1.0);
        p.lambda = 0.05 * lambda_max(p);
        const auto fit = admm_solve(p);
        CHECK(kkt_residual(fit.coefficients, p) <= 1e-5 * kkt_scale(p));
    }
}

TEST_CASE("bivariate fused lasso takes the sparse path") {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    const std::vector<double> lo{0.0, 0.0}, hi{1.0, 1.0};
    const std::vector<std::size_t> dims{6, 5};
    const auto mesh = TensorMesh::regular(lo, hi, dims);
    DenseMatrix x(60, 2);
    Vector y(60);
    for (Index i = 0; i < 60; ++i) {
        x(i, 0) = u(rng);
        x(i, 1) = u(rng);
        y(i) = std::exp(x(i, 0) * x(i, 1)) + 0.2 * g(rng);
    }
    MBSProblem p;
    p.y = y;
    p.interp = mlp_matrix_multivariate(x, mesh, 0).matrix;
    p.penalty = penalty_operator(mesh, PenaltySpec::fused_lasso_2d());
    p.lambda = 0.05 * lambda_max(p);
    AdmmSolver solver(p.interp, p.penalty, p.y);
    CHECK_FALSE(solver.banded_path());
    const auto fit = solver.solve(p.lambda);
    CHECK(kkt_residual(fit.coefficients, p) <= 1e-5 * kkt_scale(p));
}

TEST_CASE("options and problem validation") {
    ADMMOptions bad;
    bad.max_iter = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.rho = -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.tol_abs = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    auto p = identity_problem(vec({1.0, 2.0, 3.0}), 0, -1.0);
    CHECK_THROWS_AS(admm_solve(p), Error);
    p.lambda = 1.0;
    p.y = vec({1.0, 2.0});
    CHECK_THROWS_AS(admm_solve(p), Error);
}

TEST_CASE("iteration cap returns the best iterate unconverged") {
    std::mt19937_64 rng(61);
    auto inst = random_instance(rng);
    auto& p = inst.problem;
    p.lambda = 0.01 * lambda_max(p);
    ADMMOptions opts;
    opts.max_iter = 2;
    opts.polish = false;
    const auto fit = admm_solve(p, opts);
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations <= 2);
    CHECK(fit.objective == doctest::Approx(objective_value(p, fit.coefficients)));
}

TEST_CASE("solves are deterministic") {
    std::mt19937_64 rng(67);
    auto inst = random_instance(rng);
    inst.problem.lambda = 0.2 * lambda_max(inst.problem);
    const auto a = admm_solve(inst.problem);
    const auto b = admm_solve(inst.problem);
    CHECK(a.coefficients == b.coefficients);
    CHECK(a.iterations == b.iterations);
}
