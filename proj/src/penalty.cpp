#include "mbs/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "mbs/error.hpp"

namespace mbs {

MeshFunction::MeshFunction(TensorMesh mesh, std::vector<double> values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
    require(values_.size() == mesh_.grid_size(), "mesh function length does not match the mesh");
    for (double v : values_) {
        if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "mesh function value is not finite");
    }
}

MeshFunction::MeshFunction(const Mesh& mesh, std::vector<double> values)
    : MeshFunction(TensorMesh({mesh}), std::move(values)) {}

namespace {

/// One normalized first difference along `axis` of a row-major tensor.
void difference_along(std::vector<double>& data, std::vector<std::size_t>& dims,
                      std::size_t axis, double width) {
    std::size_t inner = 1;
    for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
    std::size_t outer = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
    const std::size_t m = dims[axis];
    std::vector<double> out(outer * (m - 1) * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double* lo = &data[(o * m + i) * inner];
            const double* hi = lo + inner;
            double* dst = &out[(o * (m - 1) + i) * inner];
            for (std::size_t c = 0; c < inner; ++c) dst[c] = (hi[c] - lo[c]) / width;
        }
    }
    dims[axis] = m - 1;
    data.swap(out);
}

double accumulate(const std::vector<double>& v, double weight, double ell, double acc) {
    if (std::isinf(ell)) {
        for (double x : v) acc = std::max(acc, std::abs(weight * x));
        return acc;
    }
    for (double x : v) acc += std::pow(std::abs(weight * x), ell);
    return acc;
}

}  // namespace

double penalty_value(const MeshFunction& f, const PenaltySpec& spec) {
    spec.validate();
    const TensorMesh& mesh = f.mesh();
    require(spec.dimension() == mesh.dimension(), "penalty dimension does not match the mesh");

    if (mesh.dimension() == 1) {
        const int r = spec.orders.front()[0] - 1;
        const auto op = normalized_difference_matrix(mesh.axis(0), r, spec.ell);
        const Vector values = Eigen::Map<const Vector>(f.values().data(),
                                                       static_cast<Index>(f.values().size()));
        const Vector d = op.apply(values);
        return accumulate(std::vector<double>(d.data(), d.data() + d.size()), 1.0, spec.ell, 0.0);
    }

    require(mesh.is_regular(), "multivariate penalty requires regular axes");
    double volume = 1.0;
    for (const auto& ax : mesh.axes()) volume *= ax.step();
    const double weight = std::isinf(spec.ell) ? 1.0 : std::pow(volume, 1.0 / spec.ell);

    double acc = 0.0;
    for (const auto& r : spec.orders) {
        std::vector<double> data = f.values();
        std::vector<std::size_t> dims(mesh.dims().begin(), mesh.dims().end());
        for (std::size_t a = 0; a < dims.size(); ++a) {
            require(static_cast<int>(dims[a]) >= r[a] + 1, "mesh axis too small for the requested order");
            for (int s = 0; s < r[a]; ++s) difference_along(data, dims, a, mesh.axis(a).step());
        }
        acc = accumulate(data, weight, spec.ell, acc);
    }
    return acc;
}

}  // namespace mbs
