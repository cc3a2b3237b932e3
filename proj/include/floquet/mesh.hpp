#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "floquet/error.hpp"

namespace floquet {

/// Nodal state on a mesh.
using State = Eigen::VectorXd;

/// Tensor-product grid on an interval or a rectangle, with trapezoid
/// quadrature weights. Nodes are numbered with the first axis fastest.
struct SpatialMesh {
    int dimension = 1;
    std::array<double, 2> extent{1.0, 1.0};
    std::array<int, 2> counts{1, 1};
    std::array<double, 2> spacing{0.0, 0.0};
    std::vector<std::array<double, 2>> coords;
    std::vector<int> boundary;
    Eigen::VectorXd weights;

    int size() const noexcept { return counts[0] * counts[1]; }
    int index(int i, int j = 0) const noexcept { return i + counts[0] * j; }
    double measure() const noexcept { return dimension == 1 ? extent[0] : extent[0] * extent[1]; }
};

inline SpatialMesh build_mesh(int dimension, std::span<const double> extent, std::span<const int> counts) {
    if (dimension != 1 && dimension != 2)
        throw ConfigError("mesh.dimension: must be 1 or 2, got " + std::to_string(dimension));
    if (static_cast<int>(extent.size()) != dimension)
        throw ConfigError("mesh.extent: expected " + std::to_string(dimension) + " entries");
    if (static_cast<int>(counts.size()) != dimension)
        throw ConfigError("mesh.counts: expected " + std::to_string(dimension) + " entries");

    SpatialMesh mesh;
    mesh.dimension = dimension;
    for (int axis = 0; axis < dimension; ++axis) {
        if (!(extent[axis] > 0.0) || !std::isfinite(extent[axis]))
            throw ConfigError("mesh.extent: axis " + std::to_string(axis) + " must be positive");
        if (counts[axis] < 3)
            throw ConfigError("mesh.counts: axis " + std::to_string(axis) + " needs at least 3 nodes, got "
                              + std::to_string(counts[axis]));
        mesh.extent[axis] = extent[axis];
        mesh.counts[axis] = counts[axis];
        mesh.spacing[axis] = extent[axis] / (counts[axis] - 1);
    }
    if (dimension == 1) {
        mesh.extent[1] = 1.0;
        mesh.counts[1] = 1;
    }

    const int nx = mesh.counts[0];
    const int ny = mesh.counts[1];
    auto axis_weight = [&](int axis, int i) {
        if (axis >= dimension) return 1.0;
        const int n = mesh.counts[axis];
        const double h = mesh.spacing[axis];
        return (i == 0 || i == n - 1) ? 0.5 * h : h;
    };

    mesh.coords.resize(mesh.size());
    mesh.weights.resize(mesh.size());
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int k = mesh.index(i, j);
            // Last node snaps to the extent so that coords are exact at both ends.
            const double x = (i == nx - 1) ? mesh.extent[0] : i * mesh.spacing[0];
            const double y = dimension == 1 ? 0.0 : ((j == ny - 1) ? mesh.extent[1] : j * mesh.spacing[1]);
            mesh.coords[k] = {x, y};
            mesh.weights[k] = axis_weight(0, i) * axis_weight(1, j);
            const bool on_boundary = i == 0 || i == nx - 1 || (dimension == 2 && (j == 0 || j == ny - 1));
            if (on_boundary) mesh.boundary.push_back(k);
        }
    }
    return mesh;
}

inline SpatialMesh build_mesh_1d(double length, int count) {
    const std::array<double, 1> e{length};
    const std::array<int, 1> c{count};
    return build_mesh(1, e, c);
}

/// Discrete L1 norm, sum_i w_i |u_i|.
inline double l1_norm(const SpatialMesh& mesh, const State& u) {
    return mesh.weights.dot(u.cwiseAbs());
}

/// Quadrature-weighted duality pairing <w, u> = sum_i w_i * wstar_i * u_i.
inline double pairing(const SpatialMesh& mesh, const State& wstar, const State& u) {
    return (mesh.weights.array() * wstar.array() * u.array()).sum();
}

} // namespace floquet
