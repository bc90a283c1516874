#include "mbs/solver.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "mbs/banded.hpp"
#include "mbs/error.hpp"

namespace mbs {

using ColSparse = Eigen::SparseMatrix<double>;

void MBSProblem::validate() const {
    require(interp.cols() == penalty.cols(), "interpolation and penalty column counts differ");
    require(interp.rows() == y.size(), "response length does not match interpolation rows");
    require(y.size() >= 1, "problem needs at least one observation");
    require(penalty.rows() >= 1, "penalty operator needs at least one row");
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and >= 0");
    if (!y.allFinite()) fail(ErrorCode::NonFinite, "response contains non-finite values");
    if (null_basis.size() > 0) {
        require(null_basis.rows() == penalty.cols(), "null basis row count does not match M");
    }
}

void ADMMOptions::validate() const {
    require(!rho || (*rho > 0.0 && std::isfinite(*rho)), "rho must be positive");
    require(max_iter >= 1, "max_iter must be >= 1");
    require(tol_abs > 0.0 && tol_rel > 0.0, "tolerances must be positive");
    require(certify_tol >= 0.0, "certify_tol must be >= 0");
}

Vector soft_threshold(const Vector& z, double t) {
    require(t >= 0.0, "soft threshold must be non-negative");
    Vector out(z.size());
    for (Index i = 0; i < z.size(); ++i) {
        const double a = std::abs(z[i]) - t;
        out[i] = a > 0.0 ? std::copysign(a, z[i]) : 0.0;
    }
    return out;
}

namespace {

double max_row_abs_sum(const SparseBandedMatrix& a) {
    double best = 0.0;
    const auto& s = a.storage();
    for (Index i = 0; i < s.outerSize(); ++i) {
        double row = 0.0;
        for (SparseBandedMatrix::Storage::InnerIterator it(s, i); it; ++it) row += std::abs(it.value());
        best = std::max(best, row);
    }
    return best;
}

ColSparse gram(const SparseBandedMatrix& a) {
    ColSparse at = a.storage().transpose();
    ColSparse g = at * ColSparse(a.storage());
    g.makeCompressed();
    return g;
}

/// Rows of `a` selected by `rows`, as a column-major sparse matrix.
ColSparse select_rows(const SparseBandedMatrix& a, const std::vector<Index>& rows) {
    std::vector<Triplet> t;
    const auto& s = a.storage();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (SparseBandedMatrix::Storage::InnerIterator it(s, rows[k]); it; ++it) {
            t.emplace_back(static_cast<Index>(k), it.col(), it.value());
        }
    }
    ColSparse out(static_cast<Index>(rows.size()), a.cols());
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

double kkt_core(const Vector& f, const Vector& y, const SparseBandedMatrix& o,
                const SparseBandedMatrix& d, double lambda, const KktOptions& opts) {
    const Vector grad = 2.0 * o.apply_transpose(o.apply(f) - y);
    if (lambda == 0.0) return grad.lpNorm<Eigen::Infinity>();

    const Vector df = d.apply(f);
    const double tol = opts.zero_tol.value_or(
        1e-10 * std::max(1.0, max_row_abs_sum(d) * f.lpNorm<Eigen::Infinity>()));

    std::vector<Index> zero_rows;
    Vector fixed = Vector::Zero(df.size());
    for (Index i = 0; i < df.size(); ++i) {
        if (std::abs(df[i]) <= tol) {
            zero_rows.push_back(i);
        } else {
            fixed[i] = df[i] > 0.0 ? 1.0 : -1.0;
        }
    }
    Vector resid = grad + lambda * d.apply_transpose(fixed);
    if (zero_rows.empty()) return resid.lpNorm<Eigen::Infinity>();

    // Free subgradients: least squares, clipped to the box, then projected
    // coordinate descent on the box-constrained problem.
    const ColSparse dz = select_rows(d, zero_rows);
    const auto nz = static_cast<Index>(zero_rows.size());
    ColSparse normal = dz * ColSparse(dz.transpose());
    double diag_max = 0.0;
    for (Index j = 0; j < nz; ++j) diag_max = std::max(diag_max, normal.coeff(j, j));
    ColSparse ridge(nz, nz);
    ridge.setIdentity();
    normal += (1e-12 * std::max(diag_max, 1e-300)) * ridge;
    Eigen::SimplicialLDLT<ColSparse> fac(normal);
    Vector s = Vector::Zero(nz);
    if (fac.info() == Eigen::Success) {
        // Semi-normal equations with refinement: D_Z D_Z^T squares the
        // condition number, the correction steps recover the lost digits.
        const Vector target = -resid / lambda;
        s = fac.solve(Vector(dz * target));
        for (int step = 0; step < 4 && s.allFinite(); ++step) {
            const Vector gap = target - ColSparse(dz.transpose()) * s;
            s += fac.solve(Vector(dz * gap));
        }
        if (!s.allFinite()) s.setZero();
    }
    s = s.cwiseMax(-1.0).cwiseMin(1.0);

    const ColSparse dzt = dz.transpose();  // column k holds row k of D_Z
    resid += lambda * (dzt * s);
    Vector col_norm2(nz);
    for (Index k = 0; k < nz; ++k) col_norm2[k] = dzt.col(k).squaredNorm();
    for (int sweep = 0; sweep < opts.refinement_sweeps; ++sweep) {
        double moved = 0.0;
        for (Index k = 0; k < nz; ++k) {
            if (col_norm2[k] == 0.0) continue;
            double dot = 0.0;
            for (ColSparse::InnerIterator it(dzt, k); it; ++it) dot += it.value() * resid[it.row()];
            const double target = std::clamp(s[k] - dot / (lambda * col_norm2[k]), -1.0, 1.0);
            const double step = target - s[k];
            if (step == 0.0) continue;
            s[k] = target;
            for (ColSparse::InnerIterator it(dzt, k); it; ++it) {
                resid[it.row()] += lambda * step * it.value();
            }
            moved = std::max(moved, std::abs(step));
        }
        if (moved < 1e-13) break;
    }
    return resid.lpNorm<Eigen::Infinity>();
}

double objective_core(const Vector& f, const Vector& y, const SparseBandedMatrix& o,
                      const SparseBandedMatrix& d, double lambda) {
    return (y - o.apply(f)).squaredNorm() + lambda * d.apply(f).lpNorm<1>();
}

}  // namespace

double objective_value(const MBSProblem& prob, const Vector& f) {
    prob.validate();
    require(f.size() == prob.interp.cols(), "coefficient length does not match the problem");
    return objective_core(f, prob.y, prob.interp, prob.penalty, prob.lambda);
}

namespace {

std::vector<signed char> support_signs(const Vector& alpha) {
    std::vector<signed char> out(static_cast<std::size_t>(alpha.size()));
    for (Index i = 0; i < alpha.size(); ++i) {
        out[static_cast<std::size_t>(i)] = alpha[i] > 0.0 ? 1 : (alpha[i] < 0.0 ? -1 : 0);
    }
    return out;
}

}  // namespace

struct AdmmSolver::Impl {
    SparseBandedMatrix o;
    SparseBandedMatrix d;
    // The iteration runs on the row-equilibrated operator diag(1 / row_scale) D
    // with per-row thresholds, which keeps it well conditioned when blocks of
    // the penalty differ in scale (mixed versus axis differences, say).
    SparseBandedMatrix dw;
    Vector row_scale;
    double typical_scale = 1.0;
    Vector y;
    Vector oty;
    double yty = 0.0;
    bool banded = false;

    SymmetricBand oto_band;
    SymmetricBand dtd_band;
    BandedCholesky chol;

    ColSparse oto;
    ColSparse dtd;
    Eigen::SimplicialLDLT<ColSparse> ldlt;
    bool analyzed = false;

    double factored_rho = std::numeric_limits<double>::quiet_NaN();

    bool has_state = false;
    Vector f, alpha, u;
    double state_rho = 1.0;

    Impl(SparseBandedMatrix interp, SparseBandedMatrix penalty, Vector resp)
        : o(std::move(interp)), d(std::move(penalty)), y(std::move(resp)) {
        oty = o.apply_transpose(y);
        yty = y.squaredNorm();
        const auto& dv = d.storage();
        row_scale = Vector::Ones(d.rows());
        for (Index i = 0; i < dv.outerSize(); ++i) {
            double top = 0.0;
            for (SparseBandedMatrix::Storage::InnerIterator it(dv, i); it; ++it) {
                top = std::max(top, std::abs(it.value()));
            }
            if (top > 0.0) row_scale[i] = top;
        }
        dw = d.row_scaled(row_scale.cwiseInverse());
        typical_scale = row_scale.maxCoeff();
        banded = o.is_banded() && d.is_banded();
        if (banded) {
            oto_band = SymmetricBand::gram(o);
            dtd_band = SymmetricBand::gram(dw);
        } else {
            oto = gram(o);
            dtd = gram(dw);
        }
    }

    const ColSparse& sparse_oto() {
        if (oto.rows() == 0) oto = gram(o);
        return oto;
    }

    void factor(double rho) {
        if (rho == factored_rho) return;
        if (banded) {
            chol = BandedCholesky(SymmetricBand::combine(oto_band, 1.0, dtd_band, rho));
        } else {
            ColSparse n = oto + rho * dtd;
            if (!analyzed) {
                ldlt.analyzePattern(n);
                analyzed = true;
            }
            ldlt.factorize(n);
            if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
                fail(ErrorCode::FactorizationFailure,
                     "normal matrix O^T O + rho D^T D is not positive definite");
            }
        }
        factored_rho = rho;
    }

    void solve_normal(Vector& rhs) const {
        if (banded) {
            chol.solve_in_place(rhs);
        } else {
            rhs = ldlt.solve(rhs);
        }
    }

    double squared_residual(const Vector& x) const {
        const double quad = banded ? oto_band.quadratic_form(x) : x.dot(oto * x);
        return std::max(0.0, quad - 2.0 * x.dot(oty) + yty);
    }

    /// Minimizer of the objective with D f fixed to zero where signs == 0
    /// and the l1 term linearized elsewhere, plus the multipliers of the
    /// zero rows (in row order).
    std::optional<std::pair<Vector, Vector>> polish_on(double lambda,
                                                       const std::vector<signed char>& signs,
                                                       const Vector& start) {
        const Index m = o.cols();
        std::vector<Index> zero_rows;
        Vector sign_term = Vector::Zero(d.rows());
        for (std::size_t i = 0; i < signs.size(); ++i) {
            if (signs[i] == 0) {
                zero_rows.push_back(static_cast<Index>(i));
            } else {
                sign_term[static_cast<Index>(i)] = signs[i];
            }
        }
        const ColSparse& g = sparse_oto();
        const ColSparse dz = select_rows(d, zero_rows);
        const auto nz = static_cast<Index>(zero_rows.size());
        const Index dim = m + nz;

        double scale = 1.0;
        for (Index j = 0; j < m; ++j) scale = std::max(scale, 2.0 * g.coeff(j, j));
        const double eps = 1e-8 * scale;

        // Unknowns are f (first m) and the zero-row multipliers. On the
        // banded path each multiplier is placed right after the last column
        // its row touches, which keeps the system banded in natural order.
        std::vector<Index> pos(static_cast<std::size_t>(dim));
        if (banded) {
            std::vector<Index> last_col(static_cast<std::size_t>(nz), 0);
            for (Index k = 0; k < dz.outerSize(); ++k) {
                for (ColSparse::InnerIterator it(dz, k); it; ++it) {
                    auto& lc = last_col[static_cast<std::size_t>(it.row())];
                    lc = std::max(lc, it.col());
                }
            }
            std::vector<std::vector<Index>> after(static_cast<std::size_t>(m));
            for (Index k = 0; k < nz; ++k) after[static_cast<std::size_t>(last_col[static_cast<std::size_t>(k)])].push_back(k);
            Index next = 0;
            for (Index j = 0; j < m; ++j) {
                pos[static_cast<std::size_t>(j)] = next++;
                for (Index k : after[static_cast<std::size_t>(j)]) pos[static_cast<std::size_t>(m + k)] = next++;
            }
        } else {
            for (Index i = 0; i < dim; ++i) pos[static_cast<std::size_t>(i)] = i;
        }
        auto at = [&](Index i) { return pos[static_cast<std::size_t>(i)]; };

        // Proximal form: the f block carries eps * I in both the factored
        // and the target matrix, so directions with no curvature stay at the
        // ADMM iterate instead of drifting. The -eps * I on the multiplier
        // block only stabilizes the factorization and is refined away.
        std::vector<Triplet> trip;
        trip.reserve(static_cast<std::size_t>(g.nonZeros() + 2 * dz.nonZeros() + dim));
        for (Index k = 0; k < g.outerSize(); ++k) {
            for (ColSparse::InnerIterator it(g, k); it; ++it) {
                trip.emplace_back(at(it.row()), at(it.col()), 2.0 * it.value());
            }
        }
        for (Index k = 0; k < dz.outerSize(); ++k) {
            for (ColSparse::InnerIterator it(dz, k); it; ++it) {
                trip.emplace_back(at(m + it.row()), at(it.col()), it.value());
                trip.emplace_back(at(it.col()), at(m + it.row()), it.value());
            }
        }
        for (Index j = 0; j < m; ++j) trip.emplace_back(at(j), at(j), eps);
        ColSparse target(dim, dim);
        target.setFromTriplets(trip.begin(), trip.end());
        for (Index j = m; j < dim; ++j) trip.emplace_back(at(j), at(j), -eps);
        ColSparse regular(dim, dim);
        regular.setFromTriplets(trip.begin(), trip.end());

        Eigen::SimplicialLDLT<ColSparse, Eigen::Lower, Eigen::NaturalOrdering<int>> natural;
        Eigen::SimplicialLDLT<ColSparse> reordered;
        if (banded) {
            natural.compute(regular);
            if (natural.info() != Eigen::Success) return std::nullopt;
        } else {
            reordered.compute(regular);
            if (reordered.info() != Eigen::Success) return std::nullopt;
        }
        auto solve = [&](const Vector& r) -> Vector {
            return banded ? Vector(natural.solve(r)) : Vector(reordered.solve(r));
        };

        Vector base_f = 2.0 * oty - lambda * d.apply_transpose(sign_term);
        Vector base = Vector::Zero(dim);
        Vector x = Vector::Zero(dim);
        for (Index j = 0; j < m; ++j) {
            base[at(j)] = base_f[j];
            x[at(j)] = start[j];
        }
        Vector center(m), now(m);
        for (int outer = 0; outer < 4; ++outer) {
            for (Index j = 0; j < m; ++j) center[j] = x[at(j)];
            Vector rhs = base;
            for (Index j = 0; j < m; ++j) rhs[at(j)] += eps * center[j];
            double last = std::numeric_limits<double>::infinity();
            for (int step = 0; step < 20; ++step) {
                const Vector r = rhs - target * x;
                const double rn = r.norm();
                if (!std::isfinite(rn) || rn >= last) break;
                last = rn;
                x += solve(r);
            }
            if (!x.allFinite()) return std::nullopt;
            for (Index j = 0; j < m; ++j) now[j] = x[at(j)];
            if ((now - center).norm() <= 1e-13 * (1.0 + center.norm())) break;
        }
        Vector nu(nz);
        for (Index k = 0; k < nz; ++k) nu[k] = x[at(m + k)];
        return std::make_pair(std::move(now), std::move(nu));
    }

    /// Polishing with active-set correction: rows whose multiplier leaves
    /// [-lambda, lambda] are released, rows whose difference changes sign
    /// are fixed to zero. Returns the lowest-objective candidate.
    std::optional<Vector> polish(double lambda, const Vector& alpha, Vector start) {
        std::vector<signed char> signs = support_signs(alpha);
        std::optional<Vector> best;
        double best_obj = std::numeric_limits<double>::infinity();
        for (int round = 0; round < 8; ++round) {
            auto sol = polish_on(lambda, signs, start);
            if (!sol) break;
            auto& [f, nu] = *sol;
            const double obj = objective_core(f, y, o, d, lambda);
            if (obj < best_obj) {
                best_obj = obj;
                best = f;
            }
            const Vector df = d.apply(f);
            bool changed = false;
            Index k = 0;
            for (std::size_t i = 0; i < signs.size(); ++i) {
                const auto row = static_cast<Index>(i);
                if (signs[i] == 0) {
                    if (std::abs(nu[k]) > lambda * (1.0 + 1e-9)) {
                        signs[i] = nu[k] > 0.0 ? 1 : -1;
                        changed = true;
                    }
                    ++k;
                } else if (signs[i] * df[row] < 0.0) {
                    signs[i] = 0;
                    changed = true;
                }
            }
            if (!changed || lambda == 0.0) break;
            start = std::move(f);
        }
        return best;
    }
};

AdmmSolver::AdmmSolver(SparseBandedMatrix interp, SparseBandedMatrix penalty, Vector y,
                       ADMMOptions options)
    : options_(options) {
    options_.validate();
    MBSProblem probe{y, interp, penalty, 0.0, {}};
    probe.validate();
    impl_ = std::make_unique<Impl>(std::move(interp), std::move(penalty), std::move(y));
}

AdmmSolver::~AdmmSolver() = default;
AdmmSolver::AdmmSolver(AdmmSolver&&) noexcept = default;
AdmmSolver& AdmmSolver::operator=(AdmmSolver&&) noexcept = default;

bool AdmmSolver::banded_path() const noexcept { return impl_->banded; }

void AdmmSolver::reset() { impl_->has_state = false; }

FitResult AdmmSolver::solve(double lambda) {
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be finite and >= 0");
    Impl& s = *impl_;
    // Default rho is proportional to the largest per-row threshold scale of
    // the equilibrated penalty; the factor was tuned on smoothing problems
    // with r <= 2. An explicit rho applies to the equilibrated operator.
    constexpr double kRhoFactor = 30.0;
    double rho = options_.rho.value_or(lambda > 0.0 ? kRhoFactor * lambda * s.typical_scale : 1.0);
    s.factor(rho);

    const Index m = s.o.cols();
    const Index q = s.d.rows();
    const auto& dmat = s.dw.storage();

    Vector f = Vector::Zero(m);
    Vector alpha = Vector::Zero(q);
    Vector u = Vector::Zero(q);
    if (s.has_state) {
        f = s.f;
        alpha = s.alpha;
        u = s.u * (s.state_rho / rho);
    }

    Vector rhs(m), df(q), alpha_prev(q), tmp_q(q), tmp_m(m);
    Vector best_f = f;
    double best_obj = std::numeric_limits<double>::infinity();
    // The updates below solve (1/2)||y - O f||^2 + (lambda/2)||D f||_1, the
    // same minimizer as the unhalved objective; hence the halved threshold.
    Vector threshold = (0.5 * lambda / rho) * s.row_scale;
    const double sqrt_q = std::sqrt(static_cast<double>(q));
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    const double kkt_scale = 1.0 + 2.0 * s.oty.lpNorm<Eigen::Infinity>();

    FitResult res;
    res.rho = rho;
    res.lambda = lambda;
    using Clock = std::chrono::steady_clock;

    // Early certification: once the sign pattern of alpha settles, polish on
    // it and stop if the KKT residual of the polished point is negligible.
    const bool certify = options_.polish && options_.certify_tol > 0.0;
    std::vector<signed char> pattern = support_signs(alpha);
    std::vector<signed char> tried;
    int stable = 0;
    int last_try = 0;
    int gap = 20;
    std::optional<Vector> certified;

    const bool adapt = options_.adapt_rho && !options_.rho;
    constexpr int kAdaptEvery = 10;
    constexpr int kMaxAdaptations = 30;
    constexpr double kBalance = 10.0;
    constexpr double kAdaptStep = 10.0;
    int last_adapt = 0;
    int adaptations = 0;

    for (int it = 1; it <= options_.max_iter; ++it) {
        const auto t0 = options_.record_history ? Clock::now() : Clock::time_point{};

        tmp_q = alpha + u;
        rhs.noalias() = dmat.transpose() * tmp_q;
        rhs = s.oty + rho * rhs;
        s.solve_normal(rhs);
        f = rhs;

        df.noalias() = dmat * f;
        alpha_prev.swap(alpha);
        tmp_q = df - u;
        for (Index i = 0; i < q; ++i) {
            const double a = std::abs(tmp_q[i]) - threshold[i];
            alpha[i] = a > 0.0 ? std::copysign(a, tmp_q[i]) : 0.0;
        }
        u += alpha - df;

        const double primal = (alpha - df).norm();
        tmp_q = alpha - alpha_prev;
        tmp_m.noalias() = dmat.transpose() * tmp_q;
        const double dual = rho * tmp_m.norm();
        tmp_m.noalias() = dmat.transpose() * u;
        const double eps_pri = sqrt_q * options_.tol_abs +
                               options_.tol_rel * std::max(df.norm(), alpha.norm());
        const double eps_dual = sqrt_m * options_.tol_abs + options_.tol_rel * rho * tmp_m.norm();

        const double obj = s.squared_residual(f) + lambda * df.cwiseAbs().dot(s.row_scale);
        if (obj < best_obj) {
            best_obj = obj;
            best_f = f;
        }
        res.iterations = it;
        res.primal_residual = primal;
        res.dual_residual = dual;
        if (options_.record_history) {
            const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
            res.history.push_back({primal, dual, obj, secs});
        }
        if (primal <= eps_pri && dual <= eps_dual) {
            res.converged = true;
            break;
        }

        // Residual balancing relative to the tolerances, with a bounded
        // number of refactorizations.
        if (adapt && it - last_adapt >= kAdaptEvery && adaptations < kMaxAdaptations) {
            const double rp = primal / eps_pri;
            const double rd = dual / eps_dual;
            double change = 1.0;
            if (rp > kBalance * rd) change = kAdaptStep;
            if (rd > kBalance * rp) change = 1.0 / kAdaptStep;
            if (change != 1.0) {
                rho *= change;
                u /= change;
                threshold /= change;
                s.factor(rho);
                last_adapt = it;
                ++adaptations;
            }
        }

        if (certify) {
            auto now = support_signs(alpha);
            stable = now == pattern ? stable + 1 : 0;
            pattern = std::move(now);
            if (stable >= 3 && it - last_try >= gap && pattern != tried) {
                last_try = it;
                gap = std::min(2 * gap, 320);
                tried = pattern;
                if (auto pol = s.polish(lambda, alpha, f)) {
                    const double pol_obj = objective_core(*pol, s.y, s.o, s.d, lambda);
                    if (pol_obj <= best_obj + 1e-12 * std::max(1.0, best_obj) &&
                        kkt_core(*pol, s.y, s.o, s.d, lambda, {}) <=
                            options_.certify_tol * kkt_scale) {
                        certified = std::move(pol);
                        break;
                    }
                }
            }
        }
    }

    s.f = f;
    s.alpha = alpha;
    s.u = u;
    s.state_rho = rho;
    res.rho = rho;
    s.has_state = true;

    if (certified) {
        // An exact minimizer paired with its multipliers is a fixed point of
        // the iteration; report the residuals of that point.
        const Vector dp = s.dw.apply(*certified);
        double pri = 0.0;
        for (Index i = 0; i < q; ++i) {
            if (alpha[i] == 0.0) pri += dp[i] * dp[i];
        }
        res.primal_residual = std::sqrt(pri);
        res.dual_residual = 0.0;
        res.converged = true;
        res.polished = true;
        res.coefficients = std::move(*certified);
        res.fitted = s.o.apply(res.coefficients);
        res.objective = objective_core(res.coefficients, s.y, s.o, s.d, lambda);
        return res;
    }

    Vector out = res.converged ? f : best_f;
    double out_obj = objective_core(out, s.y, s.o, s.d, lambda);
    if (options_.polish) {
        if (auto pol = s.polish(lambda, alpha, out)) {
            const double pol_obj = objective_core(*pol, s.y, s.o, s.d, lambda);
            if (pol_obj <= out_obj + 1e-12 * std::max(1.0, std::abs(out_obj)) &&
                kkt_core(*pol, s.y, s.o, s.d, lambda, {}) <=
                    kkt_core(out, s.y, s.o, s.d, lambda, {})) {
                out = std::move(*pol);
                out_obj = pol_obj;
                res.polished = true;
            }
        }
    }
    res.coefficients = std::move(out);
    res.fitted = s.o.apply(res.coefficients);
    res.objective = out_obj;
    return res;
}

FitResult admm_solve(const MBSProblem& prob, const ADMMOptions& opts) {
    prob.validate();
    AdmmSolver solver(prob.interp, prob.penalty, prob.y, opts);
    return solver.solve(prob.lambda);
}

std::vector<FitResult> admm_path(const SparseBandedMatrix& interp,
                                 const SparseBandedMatrix& penalty, const Vector& y,
                                 const std::vector<double>& lambdas, const ADMMOptions& opts) {
    AdmmSolver solver(interp, penalty, y, opts);
    std::vector<FitResult> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back(solver.solve(l));
    return out;
}

double kkt_residual(const Vector& f, const MBSProblem& prob, const KktOptions& opts) {
    prob.validate();
    require(f.size() == prob.interp.cols(), "coefficient length does not match the problem");
    return kkt_core(f, prob.y, prob.interp, prob.penalty, prob.lambda, opts);
}

DenseMatrix numerical_null_space(const SparseBandedMatrix& penalty) {
    const DenseMatrix dense = penalty.to_dense();
    const Index m = dense.cols();
    Eigen::BDCSVD<DenseMatrix> svd(dense, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    const double tol = 1e-10 * smax * static_cast<double>(std::max(dense.rows(), m));
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > tol) ++rank;
    }
    return svd.matrixV().rightCols(m - rank);
}

namespace {

DenseMatrix resolve_null_basis(const MBSProblem& prob) {
    if (prob.null_basis.size() > 0) return prob.null_basis;
    return numerical_null_space(prob.penalty);
}

}  // namespace

Vector null_space_fit(const MBSProblem& prob) {
    prob.validate();
    const DenseMatrix basis = resolve_null_basis(prob);
    if (basis.cols() == 0) return Vector::Zero(prob.interp.cols());
    const DenseMatrix on = prob.interp.storage() * basis;
    Eigen::ColPivHouseholderQR<DenseMatrix> qr(on);
    qr.setThreshold(1e-10);
    if (qr.rank() < basis.cols()) {
        fail(ErrorCode::RankDeficient, "interpolation is rank deficient on the penalty null space");
    }
    return basis * qr.solve(prob.y);
}

double lambda_max(const MBSProblem& prob) {
    prob.validate();
    const DenseMatrix basis = resolve_null_basis(prob);
    const Vector f0 = null_space_fit(prob);
    const Vector g = 2.0 * prob.interp.apply_transpose(prob.y - prob.interp.apply(f0));

    const ColSparse dmat(prob.penalty.storage());
    const Index m = dmat.cols();
    const Index q = dmat.rows();
    Vector u;
    if (q + basis.cols() == m) {
        // Full row rank: u = (D D^T)^{-1} D g is the unique solution.
        ColSparse ddt = dmat * ColSparse(dmat.transpose());
        Eigen::SimplicialLDLT<ColSparse> fac(ddt);
        if (fac.info() != Eigen::Success) {
            fail(ErrorCode::FactorizationFailure, "D D^T factorization failed");
        }
        u = fac.solve(Vector(dmat * g));
    } else {
        // Least-norm u = D w with D^T D w = g and w orthogonal to null(D).
        const Index d = basis.cols();
        ColSparse dtd = ColSparse(dmat.transpose()) * dmat;
        std::vector<Triplet> t;
        for (Index k = 0; k < dtd.outerSize(); ++k) {
            for (ColSparse::InnerIterator it(dtd, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
        }
        for (Index j = 0; j < d; ++j) {
            for (Index i = 0; i < m; ++i) {
                if (basis(i, j) != 0.0) {
                    t.emplace_back(i, m + j, basis(i, j));
                    t.emplace_back(m + j, i, basis(i, j));
                }
            }
        }
        ColSparse aug(m + d, m + d);
        aug.setFromTriplets(t.begin(), t.end());
        Eigen::SparseLU<ColSparse> lu;
        lu.compute(aug);
        if (lu.info() != Eigen::Success) {
            fail(ErrorCode::FactorizationFailure, "augmented null-space system is singular");
        }
        Vector rhs = Vector::Zero(m + d);
        rhs.head(m) = g;
        const Vector w = lu.solve(rhs);
        u = dmat * w.head(m);
    }
    return u.lpNorm<Eigen::Infinity>();
}

std::vector<double> lambda_grid(double lmax, int count, double lmin) {
    require(count >= 2, "lambda grid needs at least two values");
    require(lmin > 0.0 && lmin < lmax && std::isfinite(lmax), "lambda grid needs 0 < lmin < lmax");
    std::vector<double> out(static_cast<std::size_t>(count));
    const double hi = std::log(lmax);
    const double lo = std::log(lmin);
    for (int i = 0; i < count; ++i) {
        out[static_cast<std::size_t>(i)] = std::exp(hi + (lo - hi) * i / (count - 1));
    }
    out.front() = lmax;
    out.back() = lmin;
    return out;
}

}  // namespace mbs
