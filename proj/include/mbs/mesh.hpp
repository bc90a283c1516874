#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mbs {

/// Univariate mesh d_0 < d_1 < ... < d_{m-1}. Immutable once built.
///
/// Indices are zero-based throughout the library: cell j is [d_j, d_{j+1}].
class Mesh {
public:
    /// m equally spaced points from a to b inclusive.
    static Mesh regular(double a, double b, std::size_t m);

    /// Sorts the input; rejects duplicates, non-finite values and m < 2.
    static Mesh from_points(std::vector<double> points);

    std::size_t size() const noexcept { return points_.size(); }
    std::span<const double> points() const noexcept { return points_; }
    std::span<const double> widths() const noexcept { return widths_; }
    double point(std::size_t j) const { return points_[j]; }
    double width(std::size_t j) const { return widths_[j]; }
    double lower() const noexcept { return points_.front(); }
    double upper() const noexcept { return points_.back(); }
    bool is_regular() const noexcept { return regular_; }

    /// Common bin width (upper - lower) / (m - 1). Meaningful when regular.
    double step() const noexcept;

    /// Index j with d_j <= x <= d_{j+1}. Interior knots belong to the cell
    /// on their right; x == d_{m-1} maps to the last cell m-2.
    /// Throws OutOfDomain when x lies outside [d_0, d_{m-1}].
    std::size_t locate(double x) const;

private:
    explicit Mesh(std::vector<double> points);

    std::vector<double> points_;
    std::vector<double> widths_;
    bool regular_ = false;
};

/// Tensor product of univariate meshes, axis 0 first. Grid values are stored
/// row-major: the last axis varies fastest.
class TensorMesh {
public:
    explicit TensorMesh(std::vector<Mesh> axes);

    static TensorMesh regular(std::span<const double> lower,
                              std::span<const double> upper,
                              std::span<const std::size_t> dims);

    std::size_t dimension() const noexcept { return axes_.size(); }
    const Mesh& axis(std::size_t j) const { return axes_[j]; }
    std::span<const Mesh> axes() const noexcept { return axes_; }
    std::span<const std::size_t> dims() const noexcept { return dims_; }
    std::size_t grid_size() const noexcept { return total_; }
    bool is_regular() const noexcept;

    /// Row-major linear index of a multi-index.
    std::size_t linear_index(std::span<const std::size_t> index) const;
    /// Inverse of linear_index.
    std::vector<std::size_t> multi_index(std::size_t linear) const;

    /// Per-axis lower-corner cell of the point x (length == dimension()).
    std::vector<std::size_t> locate(std::span<const double> x) const;

private:
    std::vector<Mesh> axes_;
    std::vector<std::size_t> dims_;
    std::size_t total_ = 0;
};

}  // namespace mbs
