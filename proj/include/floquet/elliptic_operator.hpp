#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "floquet/error.hpp"
#include "floquet/mesh.hpp"

namespace floquet {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Conservative finite-difference discretization of div(a grad u) with the
/// Robin condition du/dn + c u = 0 (n the outward normal), diagonal
/// diffusion tensor only.
///
/// `matrix` approximates the operator itself, so it is negative
/// semidefinite: off-diagonals >= 0, diagonal <= 0. The boundary rows come
/// from eliminating a mirrored ghost node, which makes weights * matrix
/// symmetric with the trapezoid weights of the mesh.
struct EllipticOperator {
    SpatialMesh mesh;
    /// Half-grid diffusion samples per axis (see `half_point_count`).
    std::vector<Eigen::VectorXd> a_half;
    /// Robin coefficient per boundary node, ordered like `mesh.boundary`.
    Eigen::VectorXd c_boundary;
    SparseMatrix matrix;

    /// Diagonal weight making `matrix` self-adjoint.
    const Eigen::VectorXd& symmetrizer() const noexcept { return mesh.weights; }
    int size() const noexcept { return mesh.size(); }
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

/// Number of half-grid points along `axis`: (n_axis - 1) times the node
/// count of the other axis.
inline int half_point_count(const SpatialMesh& mesh, int axis) {
    return axis == 0 ? (mesh.counts[0] - 1) * mesh.counts[1] : mesh.counts[0] * (mesh.counts[1] - 1);
}

/// Coordinates of half-grid point `k` along `axis`.
inline std::array<double, 2> half_point(const SpatialMesh& mesh, int axis, int k) {
    if (axis == 0) {
        const int i = k % (mesh.counts[0] - 1);
        const int j = k / (mesh.counts[0] - 1);
        return {(i + 0.5) * mesh.spacing[0], mesh.coords[mesh.index(0, j)][1]};
    }
    const int i = k % mesh.counts[0];
    const int j = k / mesh.counts[0];
    return {mesh.coords[mesh.index(i, 0)][0], (j + 0.5) * mesh.spacing[1]};
}

inline EllipticOperator build_operator(const SpatialMesh& mesh, std::span<const Eigen::VectorXd> a_half,
                                       const Eigen::VectorXd& c_boundary) {
    if (static_cast<int>(a_half.size()) != mesh.dimension)
        throw ConfigError("operator.a: expected one diffusion sample set per axis");
    for (int axis = 0; axis < mesh.dimension; ++axis) {
        if (a_half[axis].size() != half_point_count(mesh, axis))
            throw ConfigError("operator.a: axis " + std::to_string(axis) + " expects "
                              + std::to_string(half_point_count(mesh, axis)) + " half-grid samples");
        for (Eigen::Index k = 0; k < a_half[axis].size(); ++k)
            if (!(a_half[axis][k] > 0.0) || !std::isfinite(a_half[axis][k]))
                throw ConfigError("operator.a: diffusion must be positive, got " + std::to_string(a_half[axis][k]));
    }
    if (c_boundary.size() != static_cast<Eigen::Index>(mesh.boundary.size()))
        throw ConfigError("operator.c: expected " + std::to_string(mesh.boundary.size()) + " boundary samples");
    for (Eigen::Index k = 0; k < c_boundary.size(); ++k)
        if (!(c_boundary[k] >= 0.0) || !std::isfinite(c_boundary[k]))
            throw ConfigError("operator.c: Robin coefficient must be nonnegative, got "
                              + std::to_string(c_boundary[k]));

    EllipticOperator op;
    op.mesh = mesh;
    op.a_half.assign(a_half.begin(), a_half.end());
    op.c_boundary = c_boundary;

    const int n = mesh.size();
    Eigen::VectorXd c_node = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < mesh.boundary.size(); ++k) c_node[mesh.boundary[k]] = c_boundary[k];

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(n) * (1 + 2 * mesh.dimension));
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);

    for (int axis = 0; axis < mesh.dimension; ++axis) {
        const int na = mesh.counts[axis];
        const double h = mesh.spacing[axis];
        const double h2 = h * h;
        const Eigen::VectorXd& a = a_half[axis];
        for (int j = 0; j < mesh.counts[1]; ++j) {
            for (int i = 0; i < mesh.counts[0]; ++i) {
                const int node = mesh.index(i, j);
                const int pos = axis == 0 ? i : j;
                // half-grid index of the face between pos and pos+1 on this line
                auto face = [&](int p) { return axis == 0 ? p + (mesh.counts[0] - 1) * j : i + mesh.counts[0] * p; };
                auto neighbor = [&](int p) { return axis == 0 ? mesh.index(p, j) : mesh.index(i, p); };
                if (pos == 0) {
                    const double af = a[face(0)];
                    entries.emplace_back(node, neighbor(1), 2.0 * af / h2);
                    diag[node] -= 2.0 * af / h2 + 2.0 * c_node[node] * af / h;
                } else if (pos == na - 1) {
                    const double af = a[face(na - 2)];
                    entries.emplace_back(node, neighbor(na - 2), 2.0 * af / h2);
                    diag[node] -= 2.0 * af / h2 + 2.0 * c_node[node] * af / h;
                } else {
                    const double aw = a[face(pos - 1)];
                    const double ae = a[face(pos)];
                    entries.emplace_back(node, neighbor(pos - 1), aw / h2);
                    entries.emplace_back(node, neighbor(pos + 1), ae / h2);
                    diag[node] -= (aw + ae) / h2;
                }
            }
        }
    }
    for (int k = 0; k < n; ++k) entries.emplace_back(k, k, diag[k]);

    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(entries.begin(), entries.end());
    op.matrix.makeCompressed();
    return op;
}

/// Samples `a(x, y)` at the half-grid points and `c(x, y)` at boundary nodes.
inline EllipticOperator build_operator(const SpatialMesh& mesh,
                                       const std::function<double(double, double)>& a,
                                       const std::function<double(double, double)>& c) {
    std::vector<Eigen::VectorXd> a_half(mesh.dimension);
    for (int axis = 0; axis < mesh.dimension; ++axis) {
        a_half[axis].resize(half_point_count(mesh, axis));
        for (int k = 0; k < a_half[axis].size(); ++k) {
            const auto p = half_point(mesh, axis, k);
            a_half[axis][k] = a(p[0], p[1]);
        }
    }
    Eigen::VectorXd c_boundary(mesh.boundary.size());
    for (std::size_t k = 0; k < mesh.boundary.size(); ++k) {
        const auto& p = mesh.coords[mesh.boundary[k]];
        c_boundary[k] = c(p[0], p[1]);
    }
    return build_operator(mesh, a_half, c_boundary);
}

/// 1-D convenience: constant diffusion, Robin coefficients at x = 0 and x = l.
inline EllipticOperator build_operator_1d(const SpatialMesh& mesh, double a, double c_left, double c_right) {
    std::vector<Eigen::VectorXd> a_half{Eigen::VectorXd::Constant(half_point_count(mesh, 0), a)};
    Eigen::VectorXd c(2);
    c << c_left, c_right;
    return build_operator(mesh, a_half, c);
}

struct SpectrumResult {
    /// Eigenvalues of -L, ascending.
    Eigen::VectorXd values;
    /// Columns normalized to unit discrete L1 norm, largest entry positive.
    Eigen::MatrixXd vectors;
    /// Discrete L1 norm of (-L) x - lambda x per eigenpair.
    Eigen::VectorXd residuals;
};

/// The k smallest eigenvalues of -L. Uses the symmetric similarity
/// W^{1/2} (-L) W^{-1/2}, so eigenvalues are real.
inline SpectrumResult spectrum(const EllipticOperator& op, int k) {
    const int n = op.size();
    k = std::clamp(k, 1, n);
    const Eigen::VectorXd sqrt_w = op.symmetrizer().cwiseSqrt();
    const Eigen::MatrixXd minus_l = -op.dense();
    Eigen::MatrixXd sym = sqrt_w.asDiagonal() * minus_l * sqrt_w.cwiseInverse().asDiagonal();
    sym = 0.5 * (sym + sym.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success)
        throw NumericalError("spectrum: symmetric eigensolver did not converge");

    SpectrumResult out;
    out.values = solver.eigenvalues().head(k);
    out.vectors.resize(n, k);
    out.residuals.resize(k);
    for (int m = 0; m < k; ++m) {
        Eigen::VectorXd x = sqrt_w.cwiseInverse().asDiagonal() * solver.eigenvectors().col(m);
        Eigen::Index imax = 0;
        x.cwiseAbs().maxCoeff(&imax);
        if (x[imax] < 0) x = -x;
        x /= l1_norm(op.mesh, x);
        out.vectors.col(m) = x;
        out.residuals[m] = l1_norm(op.mesh, minus_l * x - out.values[m] * x);
    }
    const double scale = std::max(1.0, out.values.cwiseAbs().maxCoeff());
    if ((out.residuals.array() > 1e-6 * scale).any()) {
        std::vector<double> diag(out.residuals.data(), out.residuals.data() + k);
        throw NumericalError("spectrum: eigenpair residuals too large", diag);
    }
    return out;
}

} // namespace floquet
