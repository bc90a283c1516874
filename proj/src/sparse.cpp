#include "mbs/sparse.hpp"

#include <algorithm>

#include "mbs/error.hpp"

namespace mbs {

SparseBandedMatrix::SparseBandedMatrix(Index rows, Index cols,
                                       const std::vector<Triplet>& entries,
                                       std::optional<Index> bandwidth)
    : storage_(rows, cols), bandwidth_(bandwidth) {
    for (const auto& t : entries) {
        require(t.row() >= 0 && t.row() < rows && t.col() >= 0 && t.col() < cols,
                "sparse entry outside matrix bounds");
    }
    storage_.setFromTriplets(entries.begin(), entries.end());
    storage_.makeCompressed();
    check_band();
}

SparseBandedMatrix::SparseBandedMatrix(Storage storage, std::optional<Index> bandwidth)
    : storage_(std::move(storage)), bandwidth_(bandwidth) {
    storage_.makeCompressed();
    check_band();
}

void SparseBandedMatrix::check_band() const {
    if (!bandwidth_) return;
    require(*bandwidth_ >= 1, "bandwidth must be positive");
    require(max_row_span() <= *bandwidth_, "row nonzeros exceed annotated bandwidth");
}

SparseBandedMatrix SparseBandedMatrix::identity(Index n) {
    Storage s(n, n);
    s.setIdentity();
    return SparseBandedMatrix(std::move(s), Index{1});
}

SparseBandedMatrix SparseBandedMatrix::from_dense(const DenseMatrix& dense) {
    std::vector<Triplet> t;
    for (Index i = 0; i < dense.rows(); ++i) {
        for (Index j = 0; j < dense.cols(); ++j) {
            if (dense(i, j) != 0.0) t.emplace_back(i, j, dense(i, j));
        }
    }
    return SparseBandedMatrix(dense.rows(), dense.cols(), t);
}

Index SparseBandedMatrix::max_row_span() const {
    Index span = 0;
    const auto* outer = storage_.outerIndexPtr();
    const auto* inner = storage_.innerIndexPtr();
    for (Index i = 0; i < storage_.rows(); ++i) {
        if (outer[i + 1] > outer[i]) {
            span = std::max<Index>(span, inner[outer[i + 1] - 1] - inner[outer[i]] + 1);
        }
    }
    return span;
}

Index SparseBandedMatrix::row_nonzeros(Index i) const {
    return storage_.outerIndexPtr()[i + 1] - storage_.outerIndexPtr()[i];
}

std::vector<Triplet> SparseBandedMatrix::triplets() const {
    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(storage_.nonZeros()));
    for (Index i = 0; i < storage_.outerSize(); ++i) {
        for (Storage::InnerIterator it(storage_, i); it; ++it) {
            out.emplace_back(it.row(), it.col(), it.value());
        }
    }
    return out;
}

Vector SparseBandedMatrix::apply(const Vector& x) const {
    require(x.size() == cols(), "operand length does not match matrix columns");
    return storage_ * x;
}

Vector SparseBandedMatrix::apply_transpose(const Vector& x) const {
    require(x.size() == rows(), "operand length does not match matrix rows");
    return storage_.transpose() * x;
}

SparseBandedMatrix SparseBandedMatrix::scaled(double c) const {
    return SparseBandedMatrix(Storage(c * storage_), bandwidth_);
}

SparseBandedMatrix SparseBandedMatrix::row_scaled(const Vector& w) const {
    require(w.size() == rows(), "row scale length does not match matrix rows");
    Storage s = storage_;
    for (Index i = 0; i < s.outerSize(); ++i) {
        for (Storage::InnerIterator it(s, i); it; ++it) it.valueRef() *= w[i];
    }
    return SparseBandedMatrix(std::move(s), bandwidth_);
}

SparseBandedMatrix SparseBandedMatrix::transpose() const {
    return SparseBandedMatrix(Storage(storage_.transpose()));
}

SparseBandedMatrix operator*(const SparseBandedMatrix& a, const SparseBandedMatrix& b) {
    require(a.cols() == b.rows(), "matrix product dimension mismatch");
    SparseBandedMatrix prod(SparseBandedMatrix::Storage(a.storage_ * b.storage_));
    if (a.bandwidth_ && b.bandwidth_) {
        // Spans add for factors whose rows shift monotonically (difference
        // and averaging operators); anything wider stays unannotated.
        const Index bound = *a.bandwidth_ + *b.bandwidth_ - 1;
        if (prod.max_row_span() <= bound) prod.bandwidth_ = bound;
    }
    return prod;
}

SparseBandedMatrix SparseBandedMatrix::kron(const SparseBandedMatrix& a,
                                            const SparseBandedMatrix& b) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(a.nonzeros() * b.nonzeros()));
    for (Index i = 0; i < a.storage_.outerSize(); ++i) {
        for (Storage::InnerIterator ia(a.storage_, i); ia; ++ia) {
            for (Index k = 0; k < b.storage_.outerSize(); ++k) {
                for (Storage::InnerIterator ib(b.storage_, k); ib; ++ib) {
                    t.emplace_back(ia.row() * b.rows() + ib.row(),
                                   ia.col() * b.cols() + ib.col(),
                                   ia.value() * ib.value());
                }
            }
        }
    }
    return SparseBandedMatrix(a.rows() * b.rows(), a.cols() * b.cols(), t);
}

SparseBandedMatrix SparseBandedMatrix::vstack(std::span<const SparseBandedMatrix> blocks) {
    require(!blocks.empty(), "vstack needs at least one block");
    const Index cols = blocks.front().cols();
    Index rows = 0;
    std::optional<Index> band = blocks.front().bandwidth_;
    for (const auto& b : blocks) {
        require(b.cols() == cols, "vstack blocks differ in column count");
        rows += b.rows();
        if (!b.bandwidth_ || !band) {
            band.reset();
        } else {
            band = std::max(*band, *b.bandwidth_);
        }
    }
    std::vector<Triplet> t;
    Index offset = 0;
    for (const auto& b : blocks) {
        for (const auto& e : b.triplets()) t.emplace_back(e.row() + offset, e.col(), e.value());
        offset += b.rows();
    }
    return SparseBandedMatrix(rows, cols, t, band);
}

}  // namespace mbs
