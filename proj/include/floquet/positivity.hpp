#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "floquet/bundle.hpp"
#include "floquet/error.hpp"
#include "floquet/hilbert_metric.hpp"
#include "floquet/mesh.hpp"
#include "floquet/propagation.hpp"

namespace floquet {

/// Pullback approximation of a global positive solution: the seed is placed
/// at time -T_back on the orbit of translate(b, -T_back) and pushed forward.
/// Only [0, T_fwd] is kept.
struct GlobalSolutionApprox {
    HullPoint b;
    double T_back = 0.0;
    double T_fwd = 0.0;
    /// Times 0, 1, ..., T_fwd (plus T_fwd itself when fractional).
    std::vector<double> times;
    /// States at `times`, each scaled to unit L1 norm.
    std::vector<State> states;
    /// log of the L1 norm of the unscaled solution at each recorded time.
    std::vector<double> log_norms;
    /// log of every renormalization factor applied on the way, in order.
    std::vector<double> log_renorm;

    /// log of the scalar removed at t = 0: u(0) = exp(log_scale) * states[0].
    double log_scale() const { return log_norms.front(); }
};

namespace detail {

/// Unit-length chunks from t0 to t1 with a final partial chunk.
inline std::vector<double> unit_breaks(double t0, double t1) {
    std::vector<double> out{t0};
    double t = t0;
    while (t1 - t > 1.0 + 1e-12) {
        t += 1.0;
        out.push_back(t);
    }
    if (t1 - t > 1e-12) out.push_back(t1);
    return out;
}

inline void check_seed(const State& seed) {
    if (seed.size() == 0 || (seed.array() < 0.0).any() || !(seed.maxCoeff() > 0.0))
        throw ConfigError("seed state must be nonnegative and nonzero");
}

} // namespace detail

inline GlobalSolutionApprox approximate_global_positive(const Propagator& prop, const HullPoint& b, double T_back,
                                                        const State& seed, double T_fwd) {
    detail::check_seed(seed);
    if (!(T_back >= 0.0) || !(T_fwd >= 0.0)) throw ConfigError("T_back and T_fwd must be nonnegative");
    const auto& mesh = prop.mesh();
    GlobalSolutionApprox g;
    g.b = b;
    g.T_back = T_back;
    g.T_fwd = T_fwd;

    // One pass over [0, T_back + T_fwd] from the shifted phase keeps every step
    // on the same time grid.
    const HullPoint start = prop.field().translate(b, -T_back);
    double log_total = std::log(l1_norm(mesh, seed));
    g.log_renorm.push_back(log_total);
    State u = seed / l1_norm(mesh, seed);

    const auto back = detail::unit_breaks(0.0, T_back);
    for (std::size_t k = 1; k < back.size(); ++k) {
        u = prop.advance(start, back[k - 1], back[k], u);
        const double nrm = l1_norm(mesh, u);
        g.log_renorm.push_back(std::log(nrm));
        log_total += std::log(nrm);
        u /= nrm;
    }
    g.times.push_back(0.0);
    g.states.push_back(u);
    g.log_norms.push_back(log_total);

    const auto fwd = detail::unit_breaks(T_back, T_back + T_fwd);
    for (std::size_t k = 1; k < fwd.size(); ++k) {
        u = prop.advance(start, fwd[k - 1], fwd[k], u);
        const double nrm = l1_norm(mesh, u);
        g.log_renorm.push_back(std::log(nrm));
        log_total += std::log(nrm);
        u /= nrm;
        g.times.push_back(fwd[k] - T_back);
        g.states.push_back(u);
        g.log_norms.push_back(log_total);
    }
    for (const auto& s : g.states)
        if (!(s.minCoeff() > 0.0)) throw NumericalError("approximate_global_positive: state lost positivity");
    return g;
}

/// Oscillations at or below this are round-off: the ladder has converged.
inline constexpr double kOscillationFloor = 1e-13;

struct UniquenessRow {
    double T_back = 0.0;
    double osc_t0 = 0.0;
    double osc_tfwd = 0.0;
    double kappa = 0.0;
    /// Median of the pointwise ratio u1/u2 at t = 0.
    double kappa_median = 0.0;
};

struct UniquenessReport {
    std::vector<UniquenessRow> rows;
    /// exp(slope) of log osc_t0 against T_back: decay per unit of pullback.
    double decay_rate = 0.0;
    /// osc_t0 strictly decreasing along the ladder until it reaches the
    /// round-off floor.
    bool decreasing = false;
    double kappa() const { return rows.back().kappa; }
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= x.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

} // namespace detail

/// Compares pullback approximations from two seeds at hull point fiber.b.
/// kappa = <vstar(b), u1(0)> / <vstar(b), u2(0)> on the unscaled solutions.
inline UniquenessReport uniqueness_test(const Propagator& prop, const PrincipalFiber& fiber, const State& seed_a,
                                        const State& seed_b, const std::vector<double>& ladder, double T_fwd) {
    if (ladder.empty()) throw ConfigError("experiment.t_back: ladder must not be empty");
    const auto& mesh = prop.mesh();
    UniquenessReport report;
    std::vector<double> xs;
    std::vector<double> ys;
    for (double T : ladder) {
        const auto ga = approximate_global_positive(prop, fiber.b, T, seed_a, T_fwd);
        const auto gb = approximate_global_positive(prop, fiber.b, T, seed_b, T_fwd);
        UniquenessRow row;
        row.T_back = T;
        row.osc_t0 = ratio_oscillation(ga.states.front(), gb.states.front());
        row.osc_tfwd = ratio_oscillation(ga.states.back(), gb.states.back());
        const double scale = std::exp(ga.log_scale() - gb.log_scale());
        row.kappa = scale * pairing(mesh, fiber.vstar, ga.states.front())
                  / pairing(mesh, fiber.vstar, gb.states.front());
        const Eigen::VectorXd ratio = ga.states.front().cwiseQuotient(gb.states.front());
        row.kappa_median = scale * detail::median(std::vector<double>(ratio.data(), ratio.data() + ratio.size()));
        report.rows.push_back(row);
        if (row.osc_t0 > kOscillationFloor) {
            xs.push_back(T);
            ys.push_back(std::log(row.osc_t0));
        }
    }
    report.decreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        if (!(report.rows[i].osc_t0 < report.rows[i - 1].osc_t0 || report.rows[i].osc_t0 <= kOscillationFloor))
            report.decreasing = false;
    report.decay_rate = xs.size() >= 2 ? std::exp(detail::log_slope(xs, ys)) : 0.0;
    return report;
}

struct MembershipRow {
    double t = 0.0;
    double defect = 0.0;
};

/// Relative distance ||(I - P(phi_t b)) u(t)||_1 / ||u(t)||_1 from the
/// principal subbundle along the recorded times of `gsol`. `fibers[i]` must
/// sit at translate(gsol.b, gsol.times[i]).
inline std::vector<MembershipRow> bundle_membership_test(const Propagator& prop, const GlobalSolutionApprox& gsol,
                                                         const std::vector<PrincipalFiber>& fibers) {
    if (fibers.size() != gsol.states.size())
        throw ConfigError("bundle_membership_test: need one fiber per recorded time");
    const auto& mesh = prop.mesh();
    std::vector<MembershipRow> rows;
    for (std::size_t i = 0; i < fibers.size(); ++i) {
        const State& u = gsol.states[i];
        rows.push_back({gsol.times[i], l1_norm(mesh, project(mesh, fibers[i], u).complement) / l1_norm(mesh, u)});
    }
    return rows;
}

/// Fibers at translate(b, t) for each t, reusing phases already computed.
inline std::vector<PrincipalFiber> orbit_fibers(const Propagator& prop, const HullPoint& b,
                                                const std::vector<double>& times, const FiberOptions& opt = {}) {
    std::vector<PrincipalFiber> out;
    for (double t : times) {
        const HullPoint bt = prop.field().translate(b, t);
        auto same = std::find_if(out.begin(), out.end(),
                                 [&](const PrincipalFiber& f) { return phase_distance(f.b, bt) < 1e-12; });
        if (same != out.end()) {
            PrincipalFiber copy = *same;
            copy.b = bt;
            out.push_back(std::move(copy));
        } else {
            out.push_back(compute_fiber(prop, bt, opt));
        }
    }
    return out;
}

} // namespace floquet
