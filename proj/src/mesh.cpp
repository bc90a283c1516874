#include "mbs/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mbs/error.hpp"

namespace mbs {

namespace {

constexpr double kRegularTol = 1e-12;

}  // namespace

Mesh::Mesh(std::vector<double> points) : points_(std::move(points)) {
    const std::size_t m = points_.size();
    widths_.resize(m - 1);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        widths_[j] = points_[j + 1] - points_[j];
    }
    const double span = points_.back() - points_.front();
    double dev = 0.0;
    for (double w : widths_) dev = std::max(dev, std::abs(w - widths_[0]));
    regular_ = dev <= kRegularTol * span;
}

Mesh Mesh::regular(double a, double b, std::size_t m) {
    require(std::isfinite(a) && std::isfinite(b), "mesh bounds must be finite");
    require(a < b, "regular mesh requires a < b");
    require(m >= 2, "regular mesh requires at least 2 points");
    std::vector<double> pts(m);
    const double h = (b - a) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) pts[j] = a + h * static_cast<double>(j);
    pts.back() = b;
    return Mesh(std::move(pts));
}

Mesh Mesh::from_points(std::vector<double> points) {
    require(points.size() >= 2, "mesh requires at least 2 points");
    for (double p : points) {
        if (!std::isfinite(p)) fail(ErrorCode::NonFinite, "mesh point is not finite");
    }
    std::sort(points.begin(), points.end());
    for (std::size_t j = 0; j + 1 < points.size(); ++j) {
        if (!(points[j] < points[j + 1])) {
            std::ostringstream os;
            os << "duplicate mesh point " << points[j];
            fail(ErrorCode::InvalidArgument, os.str());
        }
    }
    return Mesh(std::move(points));
}

double Mesh::step() const noexcept {
    return (points_.back() - points_.front()) / static_cast<double>(points_.size() - 1);
}

std::size_t Mesh::locate(double x) const {
    if (!(x >= points_.front() && x <= points_.back())) {
        std::ostringstream os;
        os << "x = " << x << " outside mesh [" << points_.front() << ", "
           << points_.back() << "]";
        fail(ErrorCode::OutOfDomain, os.str());
    }
    // First knot strictly greater than x; the cell starts one before it.
    auto it = std::upper_bound(points_.begin(), points_.end(), x);
    auto j = static_cast<std::size_t>(it - points_.begin());
    if (j == 0) return 0;
    return std::min(j - 1, points_.size() - 2);
}

TensorMesh::TensorMesh(std::vector<Mesh> axes) : axes_(std::move(axes)) {
    require(!axes_.empty(), "tensor mesh needs at least one axis");
    dims_.reserve(axes_.size());
    total_ = 1;
    for (const auto& ax : axes_) {
        const std::size_t m = ax.size();
        dims_.push_back(m);
        if (total_ > std::numeric_limits<std::size_t>::max() / m) {
            fail(ErrorCode::InvalidArgument, "tensor mesh size overflows");
        }
        total_ *= m;
    }
}

TensorMesh TensorMesh::regular(std::span<const double> lower,
                               std::span<const double> upper,
                               std::span<const std::size_t> dims) {
    require(lower.size() == dims.size() && upper.size() == dims.size(),
            "tensor mesh bounds and dims differ in length");
    std::vector<Mesh> axes;
    axes.reserve(dims.size());
    for (std::size_t j = 0; j < dims.size(); ++j) {
        axes.push_back(Mesh::regular(lower[j], upper[j], dims[j]));
    }
    return TensorMesh(std::move(axes));
}

bool TensorMesh::is_regular() const noexcept {
    return std::all_of(axes_.begin(), axes_.end(),
                       [](const Mesh& m) { return m.is_regular(); });
}

std::size_t TensorMesh::linear_index(std::span<const std::size_t> index) const {
    std::size_t lin = 0;
    for (std::size_t j = 0; j < dims_.size(); ++j) lin = lin * dims_[j] + index[j];
    return lin;
}

std::vector<std::size_t> TensorMesh::multi_index(std::size_t linear) const {
    std::vector<std::size_t> idx(dims_.size());
    for (std::size_t j = dims_.size(); j-- > 0;) {
        idx[j] = linear % dims_[j];
        linear /= dims_[j];
    }
    return idx;
}

std::vector<std::size_t> TensorMesh::locate(std::span<const double> x) const {
    require(x.size() == axes_.size(), "point dimension does not match tensor mesh");
    std::vector<std::size_t> cell(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) cell[j] = axes_[j].locate(x[j]);
    return cell;
}

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::OutOfDomain: return "out-of-domain";
        case ErrorCode::SingularNormalizer: return "singular-normalizer";
        case ErrorCode::SingularNeighborhood: return "singular-neighborhood";
        case ErrorCode::SingularDesign: return "singular-design";
        case ErrorCode::FactorizationFailure: return "factorization-failure";
        case ErrorCode::RankDeficient: return "rank-deficient";
        case ErrorCode::Io: return "io";
        case ErrorCode::SchemaMismatch: return "schema-mismatch";
        case ErrorCode::NonFinite: return "non-finite-values";
    }
    return "unknown";
}

}  // namespace mbs
