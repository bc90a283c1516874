#include "mbs/interp.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "mbs/error.hpp"

namespace mbs {

namespace {

double ipow(double z, int e) {
    double v = 1.0;
    for (int i = 0; i < e; ++i) v *= z;
    return v;
}

double monomial(const double* z, const std::vector<int>& exps) {
    double v = 1.0;
    for (std::size_t a = 0; a < exps.size(); ++a) v *= ipow(z[a], exps[a]);
    return v;
}

/// Weights w with w^T f = interpolant at `target`, for nodes in rows of
/// `nodes` (local coordinates): solves Psi^T w = psi(target).
Vector local_weights(const DenseMatrix& nodes, const Vector& target,
                     const std::vector<std::vector<int>>& exps) {
    const Index L = nodes.rows();
    DenseMatrix psi(L, L);
    Vector rhs(L);
    Vector node(nodes.cols());
    for (Index i = 0; i < L; ++i) {
        node = nodes.row(i).transpose();
        for (Index j = 0; j < L; ++j) psi(i, j) = monomial(node.data(), exps[j]);
    }
    for (Index j = 0; j < L; ++j) rhs[j] = monomial(target.data(), exps[j]);
    Eigen::PartialPivLU<DenseMatrix> lu(psi.transpose());
    if (!(lu.rcond() > 1e-13)) {
        fail(ErrorCode::SingularNeighborhood, "interpolation neighborhood is not unisolvent");
    }
    return lu.solve(rhs);
}

}  // namespace

std::vector<std::vector<int>> total_degree_exponents(int p, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(p), 0);
    // Degree by degree; within a degree, earlier axes take larger powers first.
    std::function<void(int, int)> fill = [&](int axis, int remaining) {
        if (axis == p - 1) {
            cur[static_cast<std::size_t>(axis)] = remaining;
            out.push_back(cur);
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            cur[static_cast<std::size_t>(axis)] = e;
            fill(axis + 1, remaining - e);
        }
    };
    for (int d = 0; d <= k; ++d) fill(0, d);
    return out;
}

InterpolationPlan mlp_matrix(std::span<const double> xs, const Mesh& mesh, int k) {
    require(k >= 0, "interpolation order must be >= 0");
    const auto m = static_cast<Index>(mesh.size());
    require(m >= k + 1, "mesh has fewer than k + 1 points");

    const auto exps = total_degree_exponents(1, k);
    InterpolationPlan plan;
    plan.order = k;
    plan.scheme = InterpolationScheme::MovingLocalPolynomial;
    plan.neighborhoods.reserve(xs.size());
    std::vector<Triplet> t;
    t.reserve(xs.size() * static_cast<std::size_t>(k + 1));

    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto cell = static_cast<Index>(mesh.locate(xs[i]));
        // The right endpoint is its own nearest-left knot.
        if (k == 0 && xs[i] == mesh.upper()) cell = m - 1;
        const Index start = std::min(cell, m - 1 - k);
        std::vector<Index> nbhd(static_cast<std::size_t>(k + 1));
        for (int s = 0; s <= k; ++s) nbhd[static_cast<std::size_t>(s)] = start + s;

        if (k == 0) {
            t.emplace_back(static_cast<Index>(i), start, 1.0);
        } else {
            const double origin = mesh.point(static_cast<std::size_t>(start));
            const double scale = mesh.point(static_cast<std::size_t>(start + k)) - origin;
            DenseMatrix nodes(k + 1, 1);
            for (int s = 0; s <= k; ++s) {
                nodes(s, 0) = (mesh.point(static_cast<std::size_t>(start + s)) - origin) / scale;
            }
            Vector target(1);
            target[0] = (xs[i] - origin) / scale;
            const Vector w = local_weights(nodes, target, exps);
            for (int s = 0; s <= k; ++s) t.emplace_back(static_cast<Index>(i), start + s, w[s]);
        }
        plan.neighborhoods.push_back(std::move(nbhd));
    }
    plan.matrix = SparseBandedMatrix(static_cast<Index>(xs.size()), m, t, Index{k + 1});
    return plan;
}

InterpolationPlan mlp_matrix_multivariate(const DenseMatrix& points,
                                          const TensorMesh& mesh, int k) {
    require(k >= 0, "interpolation order must be >= 0");
    const auto p = static_cast<Index>(mesh.dimension());
    require(points.cols() == p, "observation dimension does not match the mesh");
    for (std::size_t a = 0; a < mesh.dimension(); ++a) {
        require(static_cast<Index>(mesh.dims()[a]) >= k + 1, "mesh axis has fewer than k + 1 points");
    }

    const auto offsets = total_degree_exponents(static_cast<int>(p), k);
    const auto L = static_cast<Index>(offsets.size());
    InterpolationPlan plan;
    plan.order = k;
    plan.scheme = InterpolationScheme::MovingLocalPolynomial;
    plan.neighborhoods.reserve(static_cast<std::size_t>(points.rows()));
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(points.rows() * L));

    std::vector<double> x(static_cast<std::size_t>(p));
    std::vector<std::size_t> start(static_cast<std::size_t>(p));
    std::vector<std::size_t> node(static_cast<std::size_t>(p));
    DenseMatrix local(L, p);
    Vector target(p);
    for (Index i = 0; i < points.rows(); ++i) {
        for (Index a = 0; a < p; ++a) x[static_cast<std::size_t>(a)] = points(i, a);
        auto cell = mesh.locate(x);
        for (std::size_t a = 0; a < start.size(); ++a) {
            if (k == 0 && x[a] == mesh.axis(a).upper()) cell[a] = mesh.dims()[a] - 1;
            start[a] = std::min(cell[a], mesh.dims()[a] - 1 - static_cast<std::size_t>(k));
            const Mesh& ax = mesh.axis(a);
            const double origin = ax.point(start[a]);
            const double scale = ax.width(std::min(start[a], ax.size() - 2));
            target[static_cast<Index>(a)] = (x[a] - origin) / scale;
        }
        std::vector<Index> nbhd;
        nbhd.reserve(static_cast<std::size_t>(L));
        for (Index l = 0; l < L; ++l) {
            for (std::size_t a = 0; a < start.size(); ++a) {
                node[a] = start[a] + static_cast<std::size_t>(offsets[static_cast<std::size_t>(l)][a]);
                const Mesh& ax = mesh.axis(a);
                local(l, static_cast<Index>(a)) =
                    (ax.point(node[a]) - ax.point(start[a])) / ax.width(std::min(start[a], ax.size() - 2));
            }
            nbhd.push_back(static_cast<Index>(mesh.linear_index(node)));
        }
        const Vector w = k == 0 ? Vector::Ones(1) : local_weights(local, target, offsets);
        for (Index l = 0; l < L; ++l) t.emplace_back(i, nbhd[static_cast<std::size_t>(l)], w[l]);
        plan.neighborhoods.push_back(std::move(nbhd));
    }
    plan.matrix = SparseBandedMatrix(points.rows(), static_cast<Index>(mesh.grid_size()), t);
    return plan;
}

namespace {

/// Truncated power (z - knot)^k_+, with the step convention for k = 0.
double truncated_power(double z, double knot, int k) {
    if (z < knot) return 0.0;
    return k == 0 ? 1.0 : ipow(z - knot, k);
}

}  // namespace

InterpolationPlan spline_matrix(std::span<const double> xs, const Mesh& mesh, int k) {
    require(k >= 0 && k <= 3, "spline interpolation supports degrees 0..3");
    const auto m = static_cast<Index>(mesh.size());
    require(m > k + 1, "spline interpolation needs m > k + 1");

    const double a = mesh.lower();
    const double span = mesh.upper() - a;
    // Interior knots: floor(k/2)+1 .. m-1-ceil(k/2), giving m - k - 1 of them.
    const Index first = k / 2 + 1;
    const Index last = m - 1 - (k + 1) / 2;
    std::vector<double> knots;
    for (Index j = first; j <= last; ++j) knots.push_back((mesh.point(static_cast<std::size_t>(j)) - a) / span);

    auto basis_row = [&](double x, auto&& row) {
        const double z = (x - a) / span;
        for (int e = 0; e <= k; ++e) row(e) = ipow(z, e);
        for (std::size_t q = 0; q < knots.size(); ++q) {
            row(k + 1 + static_cast<Index>(q)) = truncated_power(z, knots[q], k);
        }
    };

    DenseMatrix design(m, m);
    for (Index i = 0; i < m; ++i) basis_row(mesh.point(static_cast<std::size_t>(i)), design.row(i));
    // Factor the transpose: O = evals * design^{-1} = (design^{-T} evals^T)^T.
    Eigen::PartialPivLU<DenseMatrix> lu(design.transpose());
    const double rcond = lu.rcond();
    if (!(rcond > 1e-12)) {
        std::ostringstream os;
        os << "spline design is numerically singular (condition estimate " << 1.0 / rcond << ")";
        fail(ErrorCode::SingularDesign, os.str());
    }
    DenseMatrix evals(static_cast<Index>(xs.size()), m);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mesh.locate(xs[i]);  // domain check
        basis_row(xs[i], evals.row(static_cast<Index>(i)));
    }
    const DenseMatrix o = lu.solve(evals.transpose()).transpose();

    InterpolationPlan plan;
    plan.order = k;
    plan.scheme = InterpolationScheme::NaturalSpline;
    plan.matrix = SparseBandedMatrix::from_dense(o);
    return plan;
}

namespace {

void check_rising(const Mesh& mesh, int degree) {
    require(degree >= 1, "rising polynomial degree must be >= 1");
    require(mesh.size() >= 2 && (mesh.size() - 1) % static_cast<std::size_t>(degree) == 0,
            "rising polynomial basis needs m = 1 + Q K");
}

}  // namespace

Vector rising_polynomial_basis(const Mesh& mesh, int degree, double x) {
    check_rising(mesh, degree);
    const std::size_t m = mesh.size();
    const std::size_t blocks = (m - 1) / static_cast<std::size_t>(degree);
    // Breakpoints t_1..t_Q at every K-th knot; t_Q is the right end.
    std::vector<double> t(blocks);
    for (std::size_t q = 0; q < blocks; ++q) t[q] = mesh.point((q + 1) * static_cast<std::size_t>(degree));

    Vector row(static_cast<Index>(m));
    Index col = 0;
    for (int e = 0; e <= degree; ++e) row[col++] = ipow(x, e);
    for (std::size_t q = 0; q + 1 < blocks; ++q) {
        for (int e = 1; e <= degree; ++e) {
            row[col++] = truncated_power(x, t[q + 1], e) - truncated_power(x, t[q], e);
        }
    }
    return row;
}

DenseMatrix rising_polynomial_design(const Mesh& mesh, int degree) {
    check_rising(mesh, degree);
    const auto m = static_cast<Index>(mesh.size());
    DenseMatrix design(m, m);
    for (Index i = 0; i < m; ++i) {
        design.row(i) = rising_polynomial_basis(mesh, degree, mesh.point(static_cast<std::size_t>(i))).transpose();
    }
    return design;
}

DenseMatrix rising_polynomial_interpolation(std::span<const double> xs, const Mesh& mesh,
                                            int degree) {
    const DenseMatrix design = rising_polynomial_design(mesh, degree);
    Eigen::FullPivLU<DenseMatrix> lu(design);
    if (!lu.isInvertible()) fail(ErrorCode::SingularDesign, "rising polynomial design is singular");
    DenseMatrix evals(static_cast<Index>(xs.size()), design.cols());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mesh.locate(xs[i]);
        evals.row(static_cast<Index>(i)) = rising_polynomial_basis(mesh, degree, xs[i]).transpose();
    }
    return evals * lu.inverse();
}

}  // namespace mbs
