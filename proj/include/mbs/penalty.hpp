#pragma once

#include <vector>

#include "mbs/diffops.hpp"
#include "mbs/mesh.hpp"

namespace mbs {

/// Values of a function on a (tensor) mesh, row-major. All values finite.
class MeshFunction {
public:
    MeshFunction(TensorMesh mesh, std::vector<double> values);
    MeshFunction(const Mesh& mesh, std::vector<double> values);

    const TensorMesh& mesh() const noexcept { return mesh_; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    TensorMesh mesh_;
    std::vector<double> values_;
};

/// Riemann penalty P_D(f): sum over orders and grid positions of
/// |(prod delta)^(1/ell) [Delta^r f]_i|^ell, or the sup of the weighted
/// differences when ell is infinite. One-axis meshes go through the
/// normalized difference matrix so irregular meshes are supported; tensor
/// meshes are differenced directly and must be regular.
double penalty_value(const MeshFunction& f, const PenaltySpec& spec);

}  // namespace mbs
