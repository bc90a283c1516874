#pragma once

#include <vector>

#include "mbs/mesh.hpp"
#include "mbs/sparse.hpp"

namespace mbs {

/// Collection of difference multi-indices with a norm order.
///
/// Each entry of `orders` counts the differences taken along each axis, so a
/// univariate smoothness order r is the single entry {r + 1}. `ell` may be
/// +infinity for sup-norm penalty evaluation (never for solving).
struct PenaltySpec {
    std::vector<std::vector<int>> orders;
    double ell = 1.0;

    /// Univariate penalty of smoothness r: r + 1 differences.
    static PenaltySpec univariate(int r, double ell = 1.0);
    /// Bivariate fused-lasso analog {(1,1), (1,0), (0,1)}.
    static PenaltySpec fused_lasso_2d(double ell = 1.0);

    std::size_t dimension() const { return orders.empty() ? 0 : orders.front().size(); }
    /// Throws InvalidArgument when the invariants do not hold.
    void validate() const;
    /// Largest s such that the isotropic index (s, ..., s) is present, 0 if none.
    int max_isotropic_order() const;
    /// Largest admissible interpolation order: r for a univariate spec {r+1},
    /// the largest isotropic order otherwise.
    int max_interpolation_order() const;
    /// Per-axis maximum of the orders.
    std::vector<int> max_orders() const;
};

/// (n - r) x n matrix of unnormalized r-th differences; bandwidth r + 1.
SparseBandedMatrix difference_matrix(Index n, int r);

/// (n - k) x n moving average over k + 1 consecutive entries; identity for k = 0.
SparseBandedMatrix averaging_matrix(Index n, int k);

/// (m - r - 1) x m operator whose ell-th power norm is the Riemann penalty of
/// smoothness r on an arbitrary mesh. Alternates first differences with the
/// inverse widths of the averaged mesh, then weights rows by the last width
/// to the power 1/ell. Bandwidth r + 2.
SparseBandedMatrix normalized_difference_matrix(const Mesh& mesh, int r, double ell);

/// Stacked operator over all multi-indices of `spec` on a regular tensor
/// mesh, acting on row-major grid vectors. Each block is
/// (prod delta)^(1/ell) * kron_j(Delta^(r_j) / delta_j^r_j).
SparseBandedMatrix multivariate_penalty_operator(const TensorMesh& mesh,
                                                 const PenaltySpec& spec);

/// Operator used for fitting: the normalized (irregular-capable) matrix for
/// one axis, the Kronecker stack otherwise.
SparseBandedMatrix penalty_operator(const TensorMesh& mesh, const PenaltySpec& spec);

/// Orthonormal basis (grid_size x d) of the null space of penalty_operator,
/// built from the monomials every difference in `spec` annihilates.
DenseMatrix penalty_null_space(const TensorMesh& mesh, const PenaltySpec& spec);

}  // namespace mbs
