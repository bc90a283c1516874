#include "mbs/banded.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mbs/error.hpp"

namespace mbs {

SymmetricBand::SymmetricBand(Index n, Index half_bandwidth)
    : n_(n), w_(half_bandwidth),
      data_(static_cast<std::size_t>(n * (half_bandwidth + 1)), 0.0) {
    require(n >= 0 && half_bandwidth >= 0, "band dimensions must be non-negative");
}

SymmetricBand SymmetricBand::gram(const SparseBandedMatrix& a) {
    const Index span = std::max<Index>(a.max_row_span(), 1);
    SymmetricBand g(a.cols(), span - 1);
    const auto& s = a.storage();
    const auto* outer = s.outerIndexPtr();
    const auto* inner = s.innerIndexPtr();
    const auto* val = s.valuePtr();
    for (Index r = 0; r < s.rows(); ++r) {
        for (auto p = outer[r]; p < outer[r + 1]; ++p) {
            for (auto q = outer[r]; q <= p; ++q) {
                // inner indices are sorted, so inner[p] >= inner[q]
                g.at(inner[p], inner[q]) += val[p] * val[q];
            }
        }
    }
    return g;
}

SymmetricBand SymmetricBand::combine(const SymmetricBand& a, double ca,
                                     const SymmetricBand& b, double cb) {
    require(a.n_ == b.n_, "band sizes differ");
    SymmetricBand out(a.n_, std::max(a.w_, b.w_));
    for (Index i = 0; i < a.n_; ++i) {
        for (Index t = 0; t <= std::min(a.w_, i); ++t) out.at(i, i - t) += ca * a.at(i, i - t);
        for (Index t = 0; t <= std::min(b.w_, i); ++t) out.at(i, i - t) += cb * b.at(i, i - t);
    }
    return out;
}

double SymmetricBand::operator()(Index i, Index j) const {
    if (i < j) std::swap(i, j);
    return i - j <= w_ ? at(i, j) : 0.0;
}

Vector SymmetricBand::multiply(const Vector& x) const {
    require(x.size() == n_, "band multiply dimension mismatch");
    Vector y = Vector::Zero(n_);
    for (Index i = 0; i < n_; ++i) {
        y[i] += at(i, i) * x[i];
        for (Index j = std::max<Index>(0, i - w_); j < i; ++j) {
            const double v = at(i, j);
            y[i] += v * x[j];
            y[j] += v * x[i];
        }
    }
    return y;
}

double SymmetricBand::quadratic_form(const Vector& x) const {
    require(x.size() == n_, "band quadratic form dimension mismatch");
    double acc = 0.0;
    for (Index i = 0; i < n_; ++i) {
        double row = 0.5 * at(i, i) * x[i];
        for (Index j = std::max<Index>(0, i - w_); j < i; ++j) row += at(i, j) * x[j];
        acc += row * x[i];
    }
    return 2.0 * acc;
}

DenseMatrix SymmetricBand::to_dense() const {
    DenseMatrix d = DenseMatrix::Zero(n_, n_);
    for (Index i = 0; i < n_; ++i) {
        for (Index j = std::max<Index>(0, i - w_); j <= i; ++j) {
            d(i, j) = at(i, j);
            d(j, i) = at(i, j);
        }
    }
    return d;
}

BandedCholesky::BandedCholesky(const SymmetricBand& a) : l_(a) {
    const Index n = l_.size();
    const Index w = l_.half_bandwidth();
    for (Index i = 0; i < n; ++i) {
        const Index lo = std::max<Index>(0, i - w);
        for (Index j = lo; j <= i; ++j) {
            double s = l_.at(i, j);
            for (Index k = std::max(lo, j - w); k < j; ++k) s -= l_.at(i, k) * l_.at(j, k);
            if (j < i) {
                l_.at(i, j) = s / l_.at(j, j);
            } else {
                if (!(s > 0.0) || !std::isfinite(s)) {
                    std::ostringstream os;
                    os << "banded Cholesky: non-positive pivot at row " << i;
                    fail(ErrorCode::FactorizationFailure, os.str());
                }
                l_.at(i, i) = std::sqrt(s);
            }
        }
    }
}

Vector BandedCholesky::solve(const Vector& b) const {
    Vector x = b;
    solve_in_place(x);
    return x;
}

void BandedCholesky::solve_in_place(Vector& x) const {
    const Index n = l_.size();
    const Index w = l_.half_bandwidth();
    require(x.size() == n, "banded solve dimension mismatch");
    for (Index i = 0; i < n; ++i) {
        double s = x[i];
        for (Index j = std::max<Index>(0, i - w); j < i; ++j) s -= l_.at(i, j) * x[j];
        x[i] = s / l_.at(i, i);
    }
    for (Index i = n; i-- > 0;) {
        double s = x[i];
        for (Index j = i + 1; j <= std::min(n - 1, i + w); ++j) s -= l_.at(j, i) * x[j];
        x[i] = s / l_.at(i, i);
    }
}

}  // namespace mbs
