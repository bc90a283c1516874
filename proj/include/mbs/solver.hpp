#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mbs/sparse.hpp"

namespace mbs {

/// min_f ||y - O f||_2^2 + lambda ||D f||_1
struct MBSProblem {
    Vector y;
    SparseBandedMatrix interp;   // O, n x M
    SparseBandedMatrix penalty;  // D, q x M
    double lambda = 0.0;
    /// Optional orthonormal basis of null(D) (M x d). When empty, lambda_max
    /// computes one numerically from a dense SVD.
    DenseMatrix null_basis;

    void validate() const;
};

struct ADMMOptions {
    /// Penalty parameter for the row-equilibrated penalty (each row of D
    /// divided by its largest entry). Unset means 30 * lambda times the
    /// largest row scale, or 1 when lambda == 0.
    std::optional<double> rho;
    int max_iter = 5000;
    double tol_abs = 1e-8;
    double tol_rel = 1e-6;
    bool record_history = false;
    /// Post-solve equality-constrained refinement on the support of alpha;
    /// kept only when it lowers both the objective and the KKT residual.
    bool polish = true;
    /// With polishing on, the solve stops early once a polished iterate has
    /// KKT residual below certify_tol * (1 + ||2 O^T y||_inf). 0 disables.
    double certify_tol = 1e-9;
    /// Without an explicit rho, periodically rebalance it against the primal
    /// and dual residuals.
    bool adapt_rho = true;

    void validate() const;
};

struct IterationRecord {
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective = 0.0;
    double seconds = 0.0;
};

struct FitResult {
    Vector coefficients;  // f_D
    Vector fitted;        // O f_D
    double objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool converged = false;
    bool polished = false;
    double rho = 0.0;
    double lambda = 0.0;
    std::vector<IterationRecord> history;
};

/// sign(z) * max(|z| - t, 0) elementwise.
Vector soft_threshold(const Vector& z, double t);

/// ||y - O f||^2 + lambda ||D f||_1
double objective_value(const MBSProblem& prob, const Vector& f);

/// ADMM solver with cached normal-matrix factorizations.
///
/// Banded O and D go through a banded Cholesky; anything else through a
/// sparse LDL^T whose symbolic analysis is shared across rho values.
/// Successive calls to solve() warm start from the previous iterate.
class AdmmSolver {
public:
    AdmmSolver(SparseBandedMatrix interp, SparseBandedMatrix penalty, Vector y,
               ADMMOptions options = {});
    ~AdmmSolver();
    AdmmSolver(AdmmSolver&&) noexcept;
    AdmmSolver& operator=(AdmmSolver&&) noexcept;

    FitResult solve(double lambda);
    /// Forget the warm-start state.
    void reset();

    bool banded_path() const noexcept;
    const ADMMOptions& options() const noexcept { return options_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    ADMMOptions options_;
};

FitResult admm_solve(const MBSProblem& prob, const ADMMOptions& opts = {});

/// Solves along `lambdas` in the given order, warm-starting each solve.
std::vector<FitResult> admm_path(const SparseBandedMatrix& interp,
                                 const SparseBandedMatrix& penalty, const Vector& y,
                                 const std::vector<double>& lambdas,
                                 const ADMMOptions& opts = {});

struct KktOptions {
    /// Rows with |(D f)_i| at or below this count as zero. Unset: 1e-10
    /// times the rounding scale max(1, ||D||_inf ||f||_inf).
    std::optional<double> zero_tol;
    int refinement_sweeps = 200;
};

/// Stationarity violation min_s ||2 O^T (O f - y) + lambda D^T s||_inf over
/// subgradients s of ||D f||_1; zero exactly at optimal f.
double kkt_residual(const Vector& f, const MBSProblem& prob, const KktOptions& opts = {});

/// Smallest lambda at which a fit in null(D) is optimal.
double lambda_max(const MBSProblem& prob);

/// Minimizer of ||y - O f||^2 over null(D).
Vector null_space_fit(const MBSProblem& prob);

/// Orthonormal basis of null(D) from a dense SVD (for small M).
DenseMatrix numerical_null_space(const SparseBandedMatrix& penalty);

/// `count` log-spaced values from lmax down to lmin, endpoints exact.
std::vector<double> lambda_grid(double lmax, int count, double lmin);

}  // namespace mbs
