#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <span>
#include <vector>

namespace mbs {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using Triplet = Eigen::Triplet<double>;

/// Row-compressed sparse matrix with an optional band annotation.
///
/// The annotation records that every row's nonzeros fit in `bandwidth`
/// consecutive columns. Operators built from banded factors keep it so the
/// solver can take the banded factorization path.
class SparseBandedMatrix {
public:
    using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    SparseBandedMatrix() = default;
    SparseBandedMatrix(Index rows, Index cols, const std::vector<Triplet>& entries,
                       std::optional<Index> bandwidth = std::nullopt);
    explicit SparseBandedMatrix(Storage storage,
                                std::optional<Index> bandwidth = std::nullopt);

    static SparseBandedMatrix identity(Index n);
    static SparseBandedMatrix from_dense(const DenseMatrix& dense);

    Index rows() const noexcept { return storage_.rows(); }
    Index cols() const noexcept { return storage_.cols(); }
    Index nonzeros() const noexcept { return storage_.nonZeros(); }
    std::optional<Index> bandwidth() const noexcept { return bandwidth_; }
    bool is_banded() const noexcept { return bandwidth_.has_value(); }

    /// Widest column span (last - first + 1) over all rows.
    Index max_row_span() const;
    /// Number of stored entries in row i.
    Index row_nonzeros(Index i) const;

    const Storage& storage() const noexcept { return storage_; }
    double coeff(Index i, Index j) const { return storage_.coeff(i, j); }
    DenseMatrix to_dense() const { return DenseMatrix(storage_); }
    /// Entries sorted by (row, col).
    std::vector<Triplet> triplets() const;

    Vector apply(const Vector& x) const;
    Vector apply_transpose(const Vector& x) const;

    SparseBandedMatrix scaled(double c) const;
    /// diag(w) * this
    SparseBandedMatrix row_scaled(const Vector& w) const;
    SparseBandedMatrix transpose() const;

    friend SparseBandedMatrix operator*(const SparseBandedMatrix& a,
                                        const SparseBandedMatrix& b);

    static SparseBandedMatrix kron(const SparseBandedMatrix& a, const SparseBandedMatrix& b);
    static SparseBandedMatrix vstack(std::span<const SparseBandedMatrix> blocks);

private:
    void check_band() const;

    Storage storage_;
    std::optional<Index> bandwidth_;
};

}  // namespace mbs
