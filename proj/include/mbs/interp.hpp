#pragma once

#include <span>
#include <vector>

#include "mbs/mesh.hpp"
#include "mbs/sparse.hpp"

namespace mbs {

enum class InterpolationScheme { MovingLocalPolynomial, NaturalSpline };

/// Linear map from mesh values to values at observation points.
struct InterpolationPlan {
    int order = 0;
    InterpolationScheme scheme = InterpolationScheme::MovingLocalPolynomial;
    /// n x M, M the number of mesh values (row-major for tensor meshes).
    SparseBandedMatrix matrix;
    /// Mesh indices feeding each row; empty for the dense spline scheme.
    std::vector<std::vector<Index>> neighborhoods;
};

/// Moving local polynomial of degree k: each x uses the k + 1 consecutive
/// knots starting at its cell, shifted left at the right edge.
InterpolationPlan mlp_matrix(std::span<const double> xs, const Mesh& mesh, int k);

/// Multivariate moving local polynomial of total degree k. Each row of
/// `points` is one observation. The neighborhood is the lattice simplex
/// {corner + t : t >= 0, |t| <= k} from the containing cell's lower corner,
/// shifted inward at upper boundaries; C(k + p, p) nonzeros per row.
InterpolationPlan mlp_matrix_multivariate(const DenseMatrix& points,
                                          const TensorMesh& mesh, int k);

/// Truncated-power spline interpolant of degree k <= 3 through all mesh
/// values (dense rows). Throws SingularDesign when the design is numerically
/// singular (condition estimate above 1e12).
InterpolationPlan spline_matrix(std::span<const double> xs, const Mesh& mesh, int k);

/// m x m design of the degree-K rising polynomial basis at the mesh points.
/// Requires m = 1 + Q K.
DenseMatrix rising_polynomial_design(const Mesh& mesh, int degree);

/// Rising polynomial basis evaluated at x (length m).
Vector rising_polynomial_basis(const Mesh& mesh, int degree, double x);

/// Dense n x m interpolation through the rising polynomial basis,
/// psi(x)^T Psi_D^{-1}.
DenseMatrix rising_polynomial_interpolation(std::span<const double> xs,
                                            const Mesh& mesh, int degree);

/// Exponent multi-indices of total degree <= k in p variables, graded.
std::vector<std::vector<int>> total_degree_exponents(int p, int k);

}  // namespace mbs
