#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "floquet/elliptic_operator.hpp"
#include "floquet/mesh.hpp"
#include "floquet/random.hpp"

using namespace floquet;

namespace {

constexpr double kPi = std::numbers::pi;

// Smallest positive root k of (k^2 - cl cr) sin k - k (cl + cr) cos k = 0,
// the characteristic equation of -u'' = k^2 u with u'(0) = cl u(0),
// u'(1) = -cr u(1). Scan for the first sign change, then bisect.
double robin_root(double cl, double cr) {
    auto f = [&](double k) { return (k * k - cl * cr) * std::sin(k) - k * (cl + cr) * std::cos(k); };
    const double step = 1e-3;
    double lo = 1e-9;
    while (f(lo) * f(lo + step) > 0.0) lo += step;
    double hi = lo + step;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

double smallest_eigenvalue(int n, double c) {
    const auto mesh = build_mesh_1d(1.0, n);
    return spectrum(build_operator_1d(mesh, 1.0, c, c), 1).values[0];
}

} // namespace

TEST(Mesh, FiveNodeTrapezoid) {
    const auto mesh = build_mesh_1d(1.0, 5);
    const std::vector<double> x{0.0, 0.25, 0.5, 0.75, 1.0};
    const std::vector<double> w{0.125, 0.25, 0.25, 0.25, 0.125};
    ASSERT_EQ(mesh.size(), 5);
    for (int i = 0; i < 5; ++i) {
        EXPECT_DOUBLE_EQ(mesh.coords[i][0], x[i]);
        EXPECT_DOUBLE_EQ(mesh.weights[i], w[i]);
    }
    EXPECT_DOUBLE_EQ(mesh.spacing[0], 0.25);
}

TEST(Mesh, WeightsPartitionMeasure) {
    for (int n : {3, 7, 64, 201}) EXPECT_NEAR(build_mesh_1d(1.0, n).weights.sum(), 1.0, 1e-14);
    const std::vector<double> extent{1.0, 1.0};
    const std::vector<int> counts{5, 5};
    const auto square = build_mesh(2, extent, counts);
    EXPECT_EQ(square.size(), 25);
    EXPECT_NEAR(square.weights.sum(), 1.0, 1e-14);
    EXPECT_GT(square.weights.minCoeff(), 0.0);

    const std::vector<double> rect{2.0, 0.5};
    const std::vector<int> rc{9, 4};
    EXPECT_NEAR(build_mesh(2, rect, rc).weights.sum(), 1.0, 1e-14);
}

TEST(Mesh, RejectsDegenerateGrids) {
    EXPECT_THROW(build_mesh_1d(1.0, 2), ConfigError);
    EXPECT_THROW(build_mesh_1d(0.0, 5), ConfigError);
    EXPECT_THROW(build_mesh_1d(-1.0, 5), ConfigError);
}

TEST(Operator, InteriorStencilIsLaplacian) {
    const int n = 11;
    const auto mesh = build_mesh_1d(1.0, n);
    const auto L = build_operator_1d(mesh, 1.0, 0.0, 0.0).dense();
    const double h2 = mesh.spacing[0] * mesh.spacing[0];
    for (int i = 1; i < n - 1; ++i) {
        EXPECT_NEAR(L(i, i - 1) * h2, 1.0, 1e-12);
        EXPECT_NEAR(L(i, i) * h2, -2.0, 1e-12);
        EXPECT_NEAR(L(i, i + 1) * h2, 1.0, 1e-12);
    }
}

TEST(Operator, NeumannAnnihilatesConstants) {
    const auto mesh = build_mesh_1d(1.0, 33);
    const auto op = build_operator_1d(mesh, 1.0, 0.0, 0.0);
    EXPECT_LT((op.matrix * Eigen::VectorXd::Ones(33)).cwiseAbs().maxCoeff(), 1e-9);

    // Constant diffusion on a square.
    const std::vector<double> extent{1.0, 2.0};
    const std::vector<int> counts{7, 9};
    const auto sq = build_mesh(2, extent, counts);
    const auto op2 = build_operator(sq, [](double, double) { return 0.7; }, [](double, double) { return 0.0; });
    EXPECT_LT((op2.matrix * Eigen::VectorXd::Ones(sq.size())).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Operator, SignStructureAndSelfAdjointness) {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform() * 40);
        const auto mesh = build_mesh_1d(rng.uniform(0.5, 3.0), n);
        std::vector<Eigen::VectorXd> a{Eigen::VectorXd(n - 1)};
        for (int k = 0; k < n - 1; ++k) a[0][k] = rng.uniform(0.1, 2.0);
        Eigen::VectorXd c(2);
        c << rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0);
        const auto op = build_operator(mesh, a, c);
        const Eigen::MatrixXd L = op.dense();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) EXPECT_LE(L(i, j), 0.0);
                else EXPECT_GE(L(i, j), 0.0);
            }
        const Eigen::MatrixXd WL = mesh.weights.asDiagonal() * L;
        EXPECT_LE((WL - WL.transpose()).norm(), 1e-12 * WL.norm());
    }
}

TEST(Operator, RejectsBadCoefficients) {
    const auto mesh = build_mesh_1d(1.0, 9);
    EXPECT_THROW(build_operator_1d(mesh, 0.0, 0.0, 0.0), ConfigError);
    EXPECT_THROW(build_operator_1d(mesh, 1.0, -0.1, 0.0), ConfigError);
}

TEST(Operator, TwoDimensionalSignsAndSymmetry) {
    const std::vector<double> extent{1.0, 1.0};
    const std::vector<int> counts{6, 8};
    const auto mesh = build_mesh(2, extent, counts);
    const auto op = build_operator(
        mesh, [](double x, double y) { return 1.0 + x * y; }, [](double x, double) { return x; });
    const Eigen::MatrixXd L = op.dense();
    const Eigen::MatrixXd WL = mesh.weights.asDiagonal() * L;
    EXPECT_LE((WL - WL.transpose()).norm(), 1e-12 * WL.norm());
    for (int i = 0; i < L.rows(); ++i)
        for (int j = 0; j < L.cols(); ++j)
            if (i != j) EXPECT_GE(L(i, j), 0.0);
    EXPECT_GE(spectrum(op, 1).values[0], -1e-10);
}

TEST(Operator, ImplicitMatrixIsInversePositive) {
    const auto mesh = build_mesh_1d(1.0, 21);
    const auto op = build_operator_1d(mesh, 1.0, 0.5, 2.0);
    for (double dt : {1e-4, 1e-2, 1.0, 100.0}) {
        const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(21, 21) - dt * op.dense();
        const Eigen::MatrixXd inv = M.inverse();
        EXPECT_GT(inv.minCoeff(), 0.0) << "dt = " << dt;
    }
}

TEST(Spectrum, NeumannPrincipalPairIsConstant) {
    const auto mesh = build_mesh_1d(1.0, 41);
    const auto sp = spectrum(build_operator_1d(mesh, 1.0, 0.0, 0.0), 3);
    EXPECT_NEAR(sp.values[0], 0.0, 1e-10);
    const Eigen::VectorXd v = sp.vectors.col(0);
    EXPECT_LT((v.array() - 1.0).abs().maxCoeff(), 1e-8);
}

TEST(Spectrum, NeumannEigenvaluesConvergeAtSecondOrder) {
    std::vector<Eigen::VectorXd> vals;
    for (int n : {101, 201, 401}) vals.push_back(spectrum(build_operator_1d(build_mesh_1d(1.0, n), 1.0, 0, 0), 3).values);
    for (int k = 1; k <= 2; ++k) {
        const double exact = (k * kPi) * (k * kPi);
        const double e1 = vals[1][k] - exact;
        const double e0 = vals[0][k] - exact;
        const double e2 = vals[2][k] - exact;
        const double order = std::log2(e0 / e1);
        EXPECT_GE(order, 1.8);
        EXPECT_LE(order, 2.2);
        const double extrapolated = (4.0 * vals[2][k] - vals[1][k]) / 3.0;
        EXPECT_NEAR(extrapolated / exact, 1.0, 0.01);
        EXPECT_LT(std::abs(e2), std::abs(e1));
    }
}

TEST(Spectrum, RobinPrincipalEigenvalueMatchesTranscendentalRoot) {
    const double k = robin_root(1.0, 1.0);
    EXPECT_NEAR(k, 1.3065, 1e-4);
    const double exact = k * k;
    const double l1 = smallest_eigenvalue(101, 1.0);
    const double l2 = smallest_eigenvalue(201, 1.0);
    const double l3 = smallest_eigenvalue(401, 1.0);
    const double extrapolated = (4.0 * l3 - l2) / 3.0;
    EXPECT_NEAR(extrapolated, exact, 1e-6 * exact);
    const double order = std::log2((l1 - exact) / (l2 - exact));
    EXPECT_GE(order, 1.8);
    EXPECT_LE(order, 2.2);
}

TEST(Spectrum, AsymmetricRobinRoot) {
    const double k = robin_root(0.3, 4.0);
    const auto mesh = build_mesh_1d(1.0, 401);
    const double lam = spectrum(build_operator_1d(mesh, 1.0, 0.3, 4.0), 1).values[0];
    EXPECT_NEAR(lam / (k * k), 1.0, 1e-4);
}

TEST(Spectrum, RobinFormIsNonnegative) {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mesh = build_mesh_1d(1.0, 31);
        std::vector<Eigen::VectorXd> a{Eigen::VectorXd(30)};
        for (int i = 0; i < 30; ++i) a[0][i] = rng.uniform(0.05, 3.0);
        Eigen::VectorXd c(2);
        c << rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0);
        const auto sp = spectrum(build_operator(mesh, a, c), 4);
        EXPECT_GE(sp.values[0], -1e-10);
        for (int m = 0; m < 4; ++m) EXPECT_LT(sp.residuals[m], 1e-8 * std::max(1.0, sp.values[m]));
    }
}
