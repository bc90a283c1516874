#include "mbs/diffops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/QR>

#include "mbs/error.hpp"

namespace mbs {

namespace {

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

double inverse_ell(double ell) {
    return std::isinf(ell) ? 0.0 : 1.0 / ell;
}

}  // namespace

PenaltySpec PenaltySpec::univariate(int r, double ell) {
    return PenaltySpec{{{r + 1}}, ell};
}

PenaltySpec PenaltySpec::fused_lasso_2d(double ell) {
    return PenaltySpec{{{1, 1}, {1, 0}, {0, 1}}, ell};
}

void PenaltySpec::validate() const {
    require(!orders.empty(), "penalty spec needs at least one order");
    const std::size_t p = orders.front().size();
    require(p >= 1, "penalty multi-indices must have length >= 1");
    for (const auto& r : orders) {
        require(r.size() == p, "penalty multi-indices differ in length");
        for (int v : r) require(v >= 0, "penalty orders must be non-negative");
    }
    if (p == 1) {
        require(orders.size() == 1, "univariate penalty takes exactly one order");
        require(orders.front()[0] >= 1, "univariate penalty needs at least one difference");
    }
    require(ell >= 1.0, "penalty norm order must be >= 1");
}

int PenaltySpec::max_isotropic_order() const {
    int best = 0;
    for (const auto& r : orders) {
        if (r.empty()) continue;
        if (std::all_of(r.begin(), r.end(), [&](int v) { return v == r.front(); })) {
            best = std::max(best, r.front());
        }
    }
    return best;
}

int PenaltySpec::max_interpolation_order() const {
    if (dimension() == 1) return orders.front()[0] - 1;
    return max_isotropic_order();
}

std::vector<int> PenaltySpec::max_orders() const {
    std::vector<int> out(dimension(), 0);
    for (const auto& r : orders) {
        for (std::size_t j = 0; j < r.size(); ++j) out[j] = std::max(out[j], r[j]);
    }
    return out;
}

SparseBandedMatrix difference_matrix(Index n, int r) {
    require(r >= 1, "difference order must be >= 1");
    require(n > r, "difference matrix needs n > r");
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>((n - r) * (r + 1)));
    for (Index i = 0; i < n - r; ++i) {
        for (int s = 0; s <= r; ++s) {
            const double sign = ((r - s) % 2 == 0) ? 1.0 : -1.0;
            t.emplace_back(i, i + s, sign * binomial(r, s));
        }
    }
    return SparseBandedMatrix(n - r, n, t, Index{r + 1});
}

SparseBandedMatrix averaging_matrix(Index n, int k) {
    require(k >= 0, "averaging window order must be >= 0");
    require(n > k, "averaging matrix needs n > k");
    std::vector<Triplet> t;
    const double v = 1.0 / (k + 1);
    for (Index i = 0; i < n - k; ++i) {
        for (int s = 0; s <= k; ++s) t.emplace_back(i, i + s, v);
    }
    return SparseBandedMatrix(n - k, n, t, Index{k + 1});
}

SparseBandedMatrix normalized_difference_matrix(const Mesh& mesh, int r, double ell) {
    require(r >= 0, "smoothness order must be >= 0");
    require(ell >= 1.0, "penalty norm order must be >= 1");
    const auto m = static_cast<Index>(mesh.size());
    require(m >= r + 2, "mesh too small for the requested difference order");

    const Vector points = Eigen::Map<const Vector>(mesh.points().data(), m);
    SparseBandedMatrix op = SparseBandedMatrix::identity(m);
    Vector normalizer;
    for (int t = 0; t <= r; ++t) {
        // Widths of the t-averaged mesh: differences of (t+1)-point means.
        normalizer = difference_matrix(m - t, 1).apply(averaging_matrix(m, t).apply(points));
        for (Index i = 0; i < normalizer.size(); ++i) {
            if (!(normalizer[i] > 0.0)) {
                std::ostringstream os;
                os << "averaged mesh width " << i << " at level " << t << " is not positive";
                fail(ErrorCode::SingularNormalizer, os.str());
            }
        }
        op = difference_matrix(m - t, 1).row_scaled(normalizer.cwiseInverse()) * op;
    }
    const double power = inverse_ell(ell);
    return op.row_scaled(normalizer.array().pow(power).matrix());
}

SparseBandedMatrix multivariate_penalty_operator(const TensorMesh& mesh,
                                                 const PenaltySpec& spec) {
    spec.validate();
    const std::size_t p = mesh.dimension();
    require(spec.dimension() == p, "penalty dimension does not match the mesh");
    require(mesh.is_regular(), "multivariate penalty operator requires regular axes");

    double cell_volume = 1.0;
    for (const auto& ax : mesh.axes()) cell_volume *= ax.step();
    const double weight = std::pow(cell_volume, inverse_ell(spec.ell));

    std::vector<SparseBandedMatrix> blocks;
    blocks.reserve(spec.orders.size());
    for (const auto& r : spec.orders) {
        std::vector<SparseBandedMatrix> factors;
        for (std::size_t j = 0; j < p; ++j) {
            const auto m = static_cast<Index>(mesh.dims()[j]);
            if (r[j] == 0) {
                factors.push_back(SparseBandedMatrix::identity(m));
                continue;
            }
            require(m >= r[j] + 1, "mesh axis too small for the requested order");
            const double h = mesh.axis(j).step();
            factors.push_back(difference_matrix(m, r[j]).scaled(std::pow(h, -r[j])));
        }
        SparseBandedMatrix block = factors.front();
        for (std::size_t j = 1; j < p; ++j) block = SparseBandedMatrix::kron(block, factors[j]);
        blocks.push_back(block.scaled(weight));
    }
    if (blocks.size() == 1) return blocks.front();
    return SparseBandedMatrix::vstack(blocks);
}

SparseBandedMatrix penalty_operator(const TensorMesh& mesh, const PenaltySpec& spec) {
    spec.validate();
    require(spec.dimension() == mesh.dimension(), "penalty dimension does not match the mesh");
    if (mesh.dimension() == 1) {
        return normalized_difference_matrix(mesh.axis(0), spec.orders.front()[0] - 1, spec.ell);
    }
    return multivariate_penalty_operator(mesh, spec);
}

DenseMatrix penalty_null_space(const TensorMesh& mesh, const PenaltySpec& spec) {
    spec.validate();
    require(spec.dimension() == mesh.dimension(), "penalty dimension does not match the mesh");
    const std::size_t p = mesh.dimension();
    // Degrees on axis j can exceed its largest order only when every
    // multi-index also differences some other axis.
    const std::vector<int> top = spec.max_orders();
    std::vector<Index> limit(p);
    for (std::size_t j = 0; j < p; ++j) {
        bool others = true;
        for (const auto& a : spec.orders) {
            bool any = false;
            for (std::size_t i = 0; i < p; ++i) any = any || (i != j && a[i] > 0);
            others = others && any;
        }
        const auto m = static_cast<Index>(mesh.dims()[j]);
        limit[j] = others ? m : std::min<Index>(top[j], m);
    }

    // Per axis, orthonormal columns q_0, q_1, ... whose first e span the
    // polynomials of degree < e. Householder QR of the Vandermonde keeps the
    // low-degree spans accurate even when high columns are ill-conditioned.
    std::vector<DenseMatrix> bases(p);
    for (std::size_t j = 0; j < p; ++j) {
        const Mesh& ax = mesh.axis(j);
        const auto m = static_cast<Index>(ax.size());
        const double mid = 0.5 * (ax.lower() + ax.upper());
        const double half = 0.5 * (ax.upper() - ax.lower());
        DenseMatrix vander(m, limit[j]);
        for (Index i = 0; i < m; ++i) {
            const double z = (ax.point(static_cast<std::size_t>(i)) - mid) / half;
            double v = 1.0;
            for (Index e = 0; e < limit[j]; ++e, v *= z) vander(i, e) = v;
        }
        Eigen::HouseholderQR<DenseMatrix> qr(vander);
        bases[j] = qr.householderQ() * DenseMatrix::Identity(m, limit[j]);
    }
    const auto total = static_cast<Index>(mesh.grid_size());
    if (std::find(limit.begin(), limit.end(), Index{0}) != limit.end()) return DenseMatrix(total, 0);

    // Delta^a maps a degree-graded basis to one of degrees lowered by a, so the
    // product q_e is annihilated by Delta^a iff e_j < a_j on some axis, and
    // the kernel is spanned by the products every multi-index annihilates.
    std::vector<std::vector<Index>> kept;
    std::vector<Index> e(p, 0);
    bool done = false;
    while (!done) {
        bool killed = true;
        for (const auto& a : spec.orders) {
            bool any = false;
            for (std::size_t j = 0; j < p; ++j) any = any || e[j] < a[j];
            killed = killed && any;
        }
        if (killed) kept.push_back(e);
        done = true;
        for (std::size_t j = p; j-- > 0;) {
            if (++e[j] < limit[j]) {
                done = false;
                break;
            }
            e[j] = 0;
        }
    }

    DenseMatrix out(total, static_cast<Index>(kept.size()));
    for (Index lin = 0; lin < total; ++lin) {
        const auto idx = mesh.multi_index(static_cast<std::size_t>(lin));
        for (std::size_t c = 0; c < kept.size(); ++c) {
            double v = 1.0;
            for (std::size_t j = 0; j < p; ++j) v *= bases[j](static_cast<Index>(idx[j]), kept[c][j]);
            out(lin, static_cast<Index>(c)) = v;
        }
    }
    return out;
}

}  // namespace mbs
