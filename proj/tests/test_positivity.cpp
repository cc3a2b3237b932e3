#include <gtest/gtest.h>

#include <cmath>

#include "floquet/bundle.hpp"
#include "floquet/hilbert_metric.hpp"
#include "floquet/positivity.hpp"

using namespace floquet;

namespace {

struct Setup {
    Propagator prop;
    PrincipalFiber fiber;
    double lambda;
};

// a0 = sin(2 pi t) cos(pi x), slow diffusion, insulated ends.
const Setup& periodic_setup() {
    static const Setup s = [] {
        const int n = 31;
        const auto mesh = build_mesh_1d(1.0, n);
        PropagatorConfig cfg;
        cfg.dt = 1e-2;
        CoefficientField field(CoefficientKind::periodic, Eigen::VectorXd::Zero(n),
                               {parse_profile("cos-kx(1, 1)").sample(mesh)}, {1.0});
        Propagator prop(build_operator_1d(mesh, 0.15, 0, 0), std::move(field), cfg);
        const auto fiber = compute_fiber(prop, prop.field().reference());
        SeparationOptions opt;
        opt.k_max = 10;
        Rng rng(5);
        const auto est = estimate_separation(prop, compute_fibers(prop, hull_sample(prop.field(), 8, 0)), opt, rng);
        return Setup{std::move(prop), fiber, est.lambda};
    }();
    return s;
}

State random_positive(int n, Rng& rng) {
    State u(n);
    for (int i = 0; i < n; ++i) u[i] = rng.uniform(0.05, 1.0);
    return u;
}

} // namespace

TEST(GlobalSolution, HeatEquationEquilibrates) {
    const int n = 31;
    const auto mesh = build_mesh_1d(1.0, n);
    PropagatorConfig cfg;
    cfg.dt = 1e-2;
    const Propagator prop(build_operator_1d(mesh, 1.0, 0, 0), CoefficientField::constant(mesh, 0.0), cfg);
    Rng rng(1);
    const State seed = random_positive(n, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double T : {0.25, 0.5, 1.0}) {
        const auto g = approximate_global_positive(prop, prop.field().reference(), T, seed, 0.0);
        const double d = hilbert_metric(g.states.front(), State::Ones(n));
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(GlobalSolution, BookkeepingOfTimesAndScales) {
    const auto& s = periodic_setup();
    Rng rng(2);
    const State seed = random_positive(s.prop.size(), rng);
    const auto g = approximate_global_positive(s.prop, s.fiber.b, 3.0, seed, 2.5);
    ASSERT_EQ(g.times.size(), 4u);
    EXPECT_EQ(g.times.front(), 0.0);
    EXPECT_DOUBLE_EQ(g.times.back(), 2.5);
    const auto& mesh = s.prop.mesh();
    // Unscaled reconstruction against a direct run.
    const State direct = s.prop.advance(s.prop.field().translate(s.fiber.b, -3.0), 0.0, 3.0, seed);
    EXPECT_LT(l1_norm(mesh, std::exp(g.log_scale()) * g.states.front() - direct), 1e-12 * l1_norm(mesh, direct));
    for (const auto& u : g.states) EXPECT_NEAR(l1_norm(mesh, u), 1.0, 1e-13);
    EXPECT_THROW(approximate_global_positive(s.prop, s.fiber.b, 1.0, -seed, 0.0), ConfigError);
    EXPECT_THROW(approximate_global_positive(s.prop, s.fiber.b, -1.0, seed, 0.0), ConfigError);
}

TEST(GlobalSolution, ConvergesToPrincipalRayAtSeparationRate) {
    const auto& s = periodic_setup();
    Rng rng(3);
    const State seed = random_positive(s.prop.size(), rng);
    std::vector<double> d;
    for (double T : {2.0, 4.0, 8.0}) {
        const auto g = approximate_global_positive(s.prop, s.fiber.b, T, seed, 0.0);
        d.push_back(hilbert_metric(g.states.front(), s.fiber.v));
    }
    const double l2 = s.lambda * s.lambda;
    EXPECT_GE(d[1] / d[0], l2 / 2);
    EXPECT_LE(d[1] / d[0], l2 * 2);
    EXPECT_GE(d[2] / d[1], l2 * l2 / 2);
    EXPECT_LE(d[2] / d[1], l2 * l2 * 2);
}

TEST(GlobalSolution, PrincipalSeedStaysOnTheRay) {
    const auto& s = periodic_setup();
    const double T = 5.0;
    const auto seed = compute_fiber(s.prop, s.prop.field().translate(s.fiber.b, -T));
    const auto g = approximate_global_positive(s.prop, s.fiber.b, T, seed.v, 3.0);
    EXPECT_LT(ray_defect(s.prop.mesh(), g.states.front(), s.fiber.v), 1e-9);
    const auto along = orbit_fibers(s.prop, s.fiber.b, g.times);
    for (const auto& row : bundle_membership_test(s.prop, g, along)) EXPECT_LT(row.defect, 1e-9) << row.t;
}

TEST(Uniqueness, ScaledSeedsGiveExactRatio) {
    const auto& s = periodic_setup();
    Rng rng(4);
    const State seed = random_positive(s.prop.size(), rng);
    const auto rep = uniqueness_test(s.prop, s.fiber, 2.0 * seed, seed, {2, 4}, 1.0);
    for (const auto& row : rep.rows) {
        EXPECT_LT(row.osc_t0, 1e-14);
        EXPECT_NEAR(row.kappa, 2.0, 1e-13);
    }
}

TEST(Uniqueness, HeatEquationRatioIsMassRatio) {
    const int n = 31;
    const auto mesh = build_mesh_1d(1.0, n);
    PropagatorConfig cfg;
    cfg.dt = 1e-2;
    const Propagator prop(build_operator_1d(mesh, 1.0, 0, 0), CoefficientField::constant(mesh, 0.0), cfg);
    const auto fiber = compute_fiber(prop, prop.field().reference());
    Rng rng(5);
    const State f = random_positive(n, rng);
    const State g = random_positive(n, rng);
    const auto rep = uniqueness_test(prop, fiber, f, g, {1, 2}, 0.5);
    // Oracle: trapezoid integrals of the seeds.
    EXPECT_NEAR(rep.kappa(), mesh.weights.dot(f) / mesh.weights.dot(g), 1e-12);
}

TEST(Uniqueness, PeriodicLadderDecaysAtSeparationRate) {
    const auto& s = periodic_setup();
    Rng rng(6);
    const State a = random_positive(s.prop.size(), rng);
    const State b = random_positive(s.prop.size(), rng);
    const auto rep = uniqueness_test(s.prop, s.fiber, a, b, {2, 4, 8, 16}, 1.0);
    EXPECT_TRUE(rep.decreasing);
    EXPECT_LT(rep.rows.back().osc_t0, 1e-6);
    EXPECT_NEAR(rep.decay_rate / s.lambda, 1.0, 0.2);
    for (const auto& row : rep.rows) {
        EXPECT_LE(std::abs(row.kappa - row.kappa_median) / row.kappa, row.osc_t0 + 1e-12);
        EXPECT_LE(row.osc_tfwd, row.osc_t0);
    }
}

TEST(Uniqueness, ScaleEquivarianceAndSwapInversion) {
    const auto& s = periodic_setup();
    Rng rng(7);
    const State a = random_positive(s.prop.size(), rng);
    const State b = random_positive(s.prop.size(), rng);
    const std::vector<double> ladder{2, 8};
    const auto ab = uniqueness_test(s.prop, s.fiber, a, b, ladder, 1.0);
    const auto ba = uniqueness_test(s.prop, s.fiber, b, a, ladder, 1.0);
    const double alpha = 3.7;
    const auto scaled = uniqueness_test(s.prop, s.fiber, alpha * a, b, ladder, 1.0);
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        EXPECT_NEAR(scaled.rows[i].kappa / ab.rows[i].kappa, alpha, 1e-12 * alpha);
        EXPECT_NEAR(ab.rows[i].kappa * ba.rows[i].kappa, 1.0, 1e-10);
    }
}

TEST(Uniqueness, RoundOffFloorDoesNotBreakDecrease) {
    const int n = 21;
    const auto mesh = build_mesh_1d(1.0, n);
    PropagatorConfig cfg;
    cfg.dt = 1e-2;
    const Propagator prop(build_operator_1d(mesh, 1.0, 0, 0), CoefficientField::constant(mesh, 0.0), cfg);
    const auto fiber = compute_fiber(prop, prop.field().reference());
    Rng rng(8);
    const auto rep =
        uniqueness_test(prop, fiber, random_positive(n, rng), random_positive(n, rng), {2, 4, 8, 16}, 1.0);
    EXPECT_TRUE(rep.decreasing);
    EXPECT_LT(rep.rows.back().osc_t0, kOscillationFloor);
    EXPECT_THROW(uniqueness_test(prop, fiber, State::Ones(n), State::Ones(n), {}, 1.0), ConfigError);
}

TEST(Membership, DefectShrinksByLambdaPowerAndRespectsBound) {
    const auto& s = periodic_setup();
    Rng rng(9);
    const State seed = random_positive(s.prop.size(), rng);
    const auto fibers = orbit_fibers(s.prop, s.fiber.b, {0.0});
    const auto g4 = approximate_global_positive(s.prop, s.fiber.b, 4.0, seed, 0.0);
    const auto g8 = approximate_global_positive(s.prop, s.fiber.b, 8.0, seed, 0.0);
    const double d4 = bundle_membership_test(s.prop, g4, fibers).front().defect;
    const double d8 = bundle_membership_test(s.prop, g8, fibers).front().defect;
    const double l4 = std::pow(s.lambda, 4);
    EXPECT_GE(d8 / d4, l4 / 2);
    EXPECT_LE(d8 / d4, l4 * 2);

    // Initial rows bounded by (1 + N) / L with constants from the fit.
    SeparationOptions opt;
    opt.k_max = 6;
    Rng r(10);
    const auto est = estimate_separation(s.prop, compute_fibers(s.prop, hull_sample(s.prop.field(), 8, 0)), opt, r);
    const auto g0 = approximate_global_positive(s.prop, s.fiber.b, 0.0, seed, 3.0);
    const auto along = orbit_fibers(s.prop, s.fiber.b, g0.times);
    for (const auto& row : bundle_membership_test(s.prop, g0, along)) EXPECT_LE(row.defect, (1 + est.N) / est.L);
    EXPECT_THROW(bundle_membership_test(s.prop, g0, fibers), ConfigError);
}
