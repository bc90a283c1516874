#pragma once

#include <vector>

#include "mbs/sparse.hpp"

namespace mbs {

/// Symmetric matrix held by its lower band: entries (i, j) with
/// 0 <= i - j <= half_bandwidth.
class SymmetricBand {
public:
    SymmetricBand() = default;
    SymmetricBand(Index n, Index half_bandwidth);

    /// a^T a for a banded operator; half bandwidth is a.max_row_span() - 1.
    static SymmetricBand gram(const SparseBandedMatrix& a);
    /// ca * a + cb * b, widened to the larger band.
    static SymmetricBand combine(const SymmetricBand& a, double ca,
                                 const SymmetricBand& b, double cb);

    Index size() const noexcept { return n_; }
    Index half_bandwidth() const noexcept { return w_; }

    double& at(Index i, Index j) { return data_[static_cast<std::size_t>(i * (w_ + 1) + (i - j))]; }
    double at(Index i, Index j) const {
        return data_[static_cast<std::size_t>(i * (w_ + 1) + (i - j))];
    }
    /// Symmetric access, zero outside the band.
    double operator()(Index i, Index j) const;

    Vector multiply(const Vector& x) const;
    /// x^T A x
    double quadratic_form(const Vector& x) const;
    DenseMatrix to_dense() const;

private:
    Index n_ = 0;
    Index w_ = 0;
    std::vector<double> data_;
};

/// Cholesky factor of a banded SPD matrix, O(n w^2) to build and O(n w) per
/// solve. Throws FactorizationFailure on a non-positive pivot.
class BandedCholesky {
public:
    BandedCholesky() = default;
    explicit BandedCholesky(const SymmetricBand& a);

    Index size() const noexcept { return l_.size(); }
    Vector solve(const Vector& b) const;
    void solve_in_place(Vector& x) const;

private:
    SymmetricBand l_;
};

}  // namespace mbs
