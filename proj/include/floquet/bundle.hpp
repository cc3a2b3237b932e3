#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "floquet/coefficient_hull.hpp"
#include "floquet/error.hpp"
#include "floquet/hilbert_metric.hpp"
#include "floquet/mesh.hpp"
#include "floquet/propagation.hpp"
#include "floquet/random.hpp"

namespace floquet {

struct FiberOptions {
    /// Stop once successive pullback rays are closer than this in the
    /// Hilbert metric.
    double tol = 1e-10;
    /// Longest pullback horizon tried.
    int max_T = 128;
};

/// Principal pair at one hull point: v spans the one-dimensional invariant
/// positive subbundle, vstar is the positive functional whose kernel is the
/// complementary fiber.
struct PrincipalFiber {
    HullPoint b;
    /// Entrywise positive, unit discrete L1 norm.
    State v;
    /// Entrywise positive, <vstar, v> = 1 in the weighted pairing.
    State vstar;
    /// log of ||psi(1, b) v||_1.
    double growth = 0.0;
    int pullback_T = 0;
    double increment = 0.0;
    int dual_pullback_T = 0;
    double dual_increment = 0.0;
};

struct PullbackResult {
    State ray;
    int T = 0;
    double increment = 0.0;
};

namespace detail {

inline State normalized(const SpatialMesh& mesh, State u) {
    const double n = l1_norm(mesh, u);
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("pullback: ray collapsed to zero or overflowed");
    return u / n;
}

/// Runs `ray_at(T)` on T = 1, 2, 4, ... until two successive rays are
/// within tol in the Hilbert metric.
template <class RayAt>
PullbackResult pullback(RayAt&& ray_at, const FiberOptions& opt, const char* what) {
    if (!(opt.tol > 0.0)) throw ConfigError("experiment.fiber_tol: must be positive");
    PullbackResult prev{ray_at(1), 1, std::numeric_limits<double>::infinity()};
    double prev_increment = std::numeric_limits<double>::infinity();
    for (int T = 2; T <= opt.max_T; T *= 2) {
        State next = ray_at(T);
        const double increment = hilbert_metric(prev.ray, next);
        if (increment < opt.tol) return {std::move(next), T, increment};
        prev_increment = prev.increment;
        prev = {std::move(next), T, increment};
    }
    // Contraction factor per unit time implied by the last two increments.
    const double factor = std::isfinite(prev_increment) && prev_increment > 0.0
                              ? std::pow(prev.increment / prev_increment, 2.0 / prev.T)
                              : std::numeric_limits<double>::quiet_NaN();
    throw NumericalError(std::string(what) + ": pullback did not converge within max_T (last increment "
                             + std::to_string(prev.increment) + ", contraction factor " + std::to_string(factor)
                             + ")",
                         {prev.increment, factor});
}

} // namespace detail

/// Principal ray v(b): the constant state is started at translate(b, -T) and
/// pushed forward to b, doubling T until the ray settles. Renormalized once
/// per unit of time.
inline PullbackResult principal_vector(const Propagator& prop, const HullPoint& b, const FiberOptions& opt = {}) {
    const auto& mesh = prop.mesh();
    auto ray_at = [&](int T) {
        const HullPoint start = prop.field().translate(b, -static_cast<double>(T));
        State u = State::Ones(prop.size());
        for (int s = 0; s < T; ++s) u = detail::normalized(mesh, prop.advance(start, s, s + 1.0, u));
        return u;
    };
    return detail::pullback(ray_at, opt, "principal_vector");
}

/// Dual ray v*(b): the constant dual vector is pulled back from
/// translate(b, T) through the adjoint cocycle. Unnormalized against v.
inline PullbackResult dual_ray(const Propagator& prop, const HullPoint& b, const FiberOptions& opt = {}) {
    const auto& mesh = prop.mesh();
    auto ray_at = [&](int T) {
        State w = State::Ones(prop.size());
        for (int s = T - 1; s >= 0; --s) w = detail::normalized(mesh, prop.propagate_adjoint(b, s, s + 1.0, w));
        return w;
    };
    return detail::pullback(ray_at, opt, "dual_vector");
}

/// Dual ray scaled so that <vstar, v> = 1.
inline State dual_vector(const Propagator& prop, const HullPoint& b, const State& v, const FiberOptions& opt = {}) {
    State w = dual_ray(prop, b, opt).ray;
    return w / pairing(prop.mesh(), w, v);
}

inline PrincipalFiber compute_fiber(const Propagator& prop, const HullPoint& b, const FiberOptions& opt = {}) {
    PrincipalFiber f;
    f.b = b;
    auto primal = principal_vector(prop, b, opt);
    auto dual = dual_ray(prop, b, opt);
    f.v = std::move(primal.ray);
    f.pullback_T = primal.T;
    f.increment = primal.increment;
    f.vstar = dual.ray / pairing(prop.mesh(), dual.ray, f.v);
    f.dual_pullback_T = dual.T;
    f.dual_increment = dual.increment;
    f.growth = std::log(l1_norm(prop.mesh(), prop.advance(b, 0.0, 1.0, f.v)));
    if (f.v.minCoeff() <= 0.0 || f.vstar.minCoeff() <= 0.0)
        throw NumericalError("compute_fiber: principal pair lost positivity", {f.v.minCoeff(), f.vstar.minCoeff()});
    return f;
}

inline std::vector<PrincipalFiber> compute_fibers(const Propagator& prop, const std::vector<HullPoint>& points,
                                                  const FiberOptions& opt = {}) {
    std::vector<PrincipalFiber> out;
    out.reserve(points.size());
    for (const auto& b : points) {
        auto same = std::find_if(out.begin(), out.end(),
                                 [&](const PrincipalFiber& f) { return phase_distance(f.b, b) < 1e-12; });
        out.push_back(same != out.end() ? *same : compute_fiber(prop, b, opt));
    }
    return out;
}

struct Projection {
    /// Component in the kernel of vstar.
    State complement;
    /// Component along v.
    State principal;
};

/// Bundle projection P(b) u = <vstar, u> v and its complement.
inline Projection project(const SpatialMesh& mesh, const PrincipalFiber& fiber, const State& u) {
    Projection p;
    p.principal = pairing(mesh, fiber.vstar, u) * fiber.v;
    p.complement = u - p.principal;
    return p;
}

/// Colinearity defect || x/||x|| - y/||y|| ||_1 of two rays of the same sign.
inline double ray_defect(const SpatialMesh& mesh, const State& x, const State& y) {
    return l1_norm(mesh, x / l1_norm(mesh, x) - y / l1_norm(mesh, y));
}

/// Invariance defect of the pair (v, vstar) along translate(b, t): the push
/// forward of v(b) against v(phi_t b) and the adjoint pull back of
/// vstar(phi_t b) against vstar(b). Returns the larger of the two.
inline double verify_invariance(const Propagator& prop, const PrincipalFiber& at_b, const PrincipalFiber& at_bt,
                                double t) {
    const auto& mesh = prop.mesh();
    const State pushed = prop.advance(at_b.b, 0.0, t, at_b.v);
    const State pulled = prop.propagate_adjoint(at_b.b, 0.0, t, at_bt.vstar);
    return std::max(ray_defect(mesh, pushed, at_bt.v), ray_defect(mesh, pulled, at_b.vstar));
}

struct SeparationOptions {
    int k_min = 2;
    int k_max = 12;
    int trials = 4;
    /// Sub-samples per unit time for the continuous-time fit.
    int substeps = 4;
    /// Acceptable fit residual, relative to the slope magnitude.
    double residual_threshold = 0.05;
    FiberOptions fiber;
};

/// One decay series r_k for a fixed hull point and complementary vector.
struct SeparationSeries {
    int sample = 0;
    /// log r at t = 0, 1/J, 2/J, ..., k_max (J = substeps).
    std::vector<double> log_ratio;
};

struct SeparationEstimate {
    double lambda = 0.0;
    double mu = 0.0;
    double D = 1.0;
    /// Continuous-time prefactor with rate mu.
    double Dprime = 1.0;
    /// Rate of a free fit to the sub-sampled series; should reproduce mu.
    double mu_continuous = 0.0;
    double K = 0.0;
    double L = 0.0;
    double N = 0.0;
    /// RMS residual of the discrete log-linear fit over |slope|.
    double residual = 0.0;
    double residual_continuous = 0.0;
    bool fit_ok = false;
    /// r_{k+1} <= r_k on every series.
    bool monotone = false;
    int samples = 0;
    int series_count = 0;
    int substeps = 1;
    /// Largest r_k over all series, k = 0..k_max.
    std::vector<double> envelope;
    std::vector<SeparationSeries> series;
};

namespace detail {

struct LineFit {
    double slope = 0.0;
    double rms = 0.0;
};

/// Common slope with a separate intercept per series.
inline LineFit fit_common_slope(const std::vector<std::vector<std::pair<double, double>>>& groups) {
    double sxy = 0.0;
    double sxx = 0.0;
    std::vector<std::pair<double, double>> means;
    for (const auto& g : groups) {
        double mx = 0.0;
        double my = 0.0;
        for (auto [x, y] : g) {
            mx += x;
            my += y;
        }
        mx /= g.size();
        my /= g.size();
        means.emplace_back(mx, my);
        for (auto [x, y] : g) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
        }
    }
    LineFit fit;
    if (sxx <= 0.0) return fit;
    fit.slope = sxy / sxx;
    double ss = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < groups.size(); ++s) {
        for (auto [x, y] : groups[s]) {
            const double r = (y - means[s].second) - fit.slope * (x - means[s].first);
            ss += r * r;
            ++count;
        }
    }
    fit.rms = std::sqrt(ss / count);
    return fit;
}

} // namespace detail

/// Fits the exponential separation constants on converged fibers.
///
/// For each fiber and trial a random v1 in ker vstar(b) and v2 = v(b) are
/// propagated one unit at a time. v1 is re-projected onto ker vstar(phi_k b)
/// after every unit (the exact dynamics keep it there; the projection only
/// removes round-off that the dominant direction would otherwise amplify),
/// and both are renormalized with their log norms accumulated.
inline SeparationEstimate estimate_separation(const Propagator& prop, const std::vector<PrincipalFiber>& fibers,
                                              const SeparationOptions& opt, Rng& rng) {
    if (fibers.empty()) throw ConfigError("estimate_separation: no fibers");
    if (opt.k_max <= opt.k_min) throw ConfigError("experiment.k_max: must exceed k_min");
    if (opt.trials < 1) throw ConfigError("experiment.trials: must be at least 1");
    if (opt.substeps < 1) throw ConfigError("experiment.substeps: must be at least 1");
    const auto& mesh = prop.mesh();
    const auto& field = prop.field();
    const int n = prop.size();
    const int J = opt.substeps;

    SeparationEstimate est;
    est.samples = static_cast<int>(fibers.size());
    est.substeps = J;
    est.K = std::numeric_limits<double>::infinity();
    est.L = std::numeric_limits<double>::infinity();

    for (std::size_t s = 0; s < fibers.size(); ++s) {
        const PrincipalFiber& fiber = fibers[s];
        est.K = std::min(est.K, fiber.vstar.minCoeff() / fiber.vstar.maxCoeff());
        est.N = std::max(est.N, fiber.vstar.maxCoeff());

        // Dual rays along the orbit, reusing any phase already seen.
        std::vector<HullPoint> orbit_points{fiber.b};
        std::vector<State> orbit_duals{fiber.vstar};
        std::vector<int> dual_index(opt.k_max + 1, 0);
        for (int k = 1; k <= opt.k_max; ++k) {
            const HullPoint bk = field.translate(fiber.b, k);
            int found = -1;
            for (std::size_t m = 0; m < orbit_points.size(); ++m)
                if (phase_distance(orbit_points[m], bk) < 1e-12) found = static_cast<int>(m);
            if (found < 0) {
                orbit_points.push_back(bk);
                orbit_duals.push_back(dual_ray(prop, bk, opt.fiber).ray);
                found = static_cast<int>(orbit_points.size()) - 1;
            }
            dual_index[k] = found;
        }

        // Columns 0..trials-1 hold complements, the last column holds v; all
        // advance together.
        const int T = opt.trials;
        Eigen::MatrixXd V(n, T + 1);
        for (int trial = 0; trial < T; ++trial) {
            State v1(n);
            for (int i = 0; i < n; ++i) v1[i] = rng.uniform(-1.0, 1.0);
            v1 = project(mesh, fiber, v1).complement;
            V.col(trial) = v1 / l1_norm(mesh, v1);
        }
        V.col(T) = fiber.v / l1_norm(mesh, fiber.v);
        std::vector<double> logs(T + 1, 0.0);
        std::vector<SeparationSeries> batch(T);
        for (auto& series : batch) {
            series.sample = static_cast<int>(s);
            series.log_ratio.push_back(0.0);
        }
        for (int k = 1; k <= opt.k_max; ++k) {
            Eigen::MatrixXd Wk = V;
            for (int j = 1; j <= J; ++j) {
                const double ta = (k - 1) + static_cast<double>(j - 1) / J;
                const double tb = (j == J) ? static_cast<double>(k) : (k - 1) + static_cast<double>(j) / J;
                Wk = prop.advance(fiber.b, ta, tb, Wk);
                const State w2 = Wk.col(T);
                if (j == J) {
                    const State& dual = orbit_duals[dual_index[k]];
                    const double d2 = pairing(mesh, dual, w2);
                    for (int trial = 0; trial < T; ++trial)
                        Wk.col(trial) -= (pairing(mesh, dual, State(Wk.col(trial))) / d2) * w2;
                }
                const double lw2 = logs[T] + std::log(l1_norm(mesh, w2));
                for (int trial = 0; trial < T; ++trial)
                    batch[trial].log_ratio.push_back(logs[trial] + std::log(l1_norm(mesh, State(Wk.col(trial)))) - lw2);
            }
            for (int c = 0; c <= T; ++c) {
                const double nc = l1_norm(mesh, State(Wk.col(c)));
                if (!(nc > 0.0)) throw NumericalError("estimate_separation: propagated vector vanished");
                logs[c] += std::log(nc);
                V.col(c) = Wk.col(c) / nc;
            }
        }
        for (int trial = 0; trial < T; ++trial) {
            est.series.push_back(std::move(batch[trial]));
            State w(n);
            for (int i = 0; i < n; ++i) w[i] = rng.uniform();
            est.L = std::min(est.L, l1_norm(mesh, project(mesh, fiber, w).principal) / l1_norm(mesh, w));
        }
    }
    est.series_count = static_cast<int>(est.series.size());

    std::vector<std::vector<std::pair<double, double>>> discrete;
    std::vector<std::vector<std::pair<double, double>>> continuous;
    for (const auto& series : est.series) {
        std::vector<std::pair<double, double>> d;
        std::vector<std::pair<double, double>> c;
        for (std::size_t i = 0; i < series.log_ratio.size(); ++i) {
            const double t = static_cast<double>(i) / J;
            if (t < opt.k_min - 1e-12) continue;
            c.emplace_back(t, series.log_ratio[i]);
            if (i % J == 0) d.emplace_back(t, series.log_ratio[i]);
        }
        discrete.push_back(std::move(d));
        continuous.push_back(std::move(c));
    }
    const auto dfit = detail::fit_common_slope(discrete);
    const auto cfit = detail::fit_common_slope(continuous);
    est.lambda = std::exp(dfit.slope);
    est.mu = -dfit.slope;
    est.mu_continuous = -cfit.slope;
    est.residual = dfit.slope != 0.0 ? dfit.rms / std::abs(dfit.slope) : std::numeric_limits<double>::infinity();
    est.residual_continuous = cfit.slope != 0.0 ? cfit.rms / std::abs(cfit.slope)
                                                : std::numeric_limits<double>::infinity();
    // Autonomous case: lambda is the ratio of the two leading time-1 moduli.
    // A tie cannot happen for a positive map, so treat one as a broken setup.
    if (field.kind() == CoefficientKind::constant && std::abs(1.0 - est.lambda) < 1e-12)
        throw NumericalError("estimate_separation: degenerate leading spectrum (lambda = 1)", {est.lambda});

    double logD = 0.0;
    double logDprime = 0.0;
    est.monotone = true;
    est.envelope.assign(opt.k_max + 1, 0.0);
    for (const auto& series : est.series) {
        for (std::size_t i = 0; i < series.log_ratio.size(); ++i) {
            const double t = static_cast<double>(i) / J;
            logDprime = std::max(logDprime, series.log_ratio[i] + est.mu * t);
            if (i % J != 0) continue;
            const auto k = i / J;
            logD = std::max(logD, series.log_ratio[i] + est.mu * static_cast<double>(k));
            est.envelope[k] = k == 0 ? 1.0 : std::max(est.envelope[k], std::exp(series.log_ratio[i]));
            if (k > 0 && series.log_ratio[i] > series.log_ratio[i - J] + 1e-12) est.monotone = false;
        }
    }
    for (int k = 1; k <= opt.k_max; ++k) {
        if (est.envelope[k] == 0.0) est.envelope[k] = std::numeric_limits<double>::min();
    }
    est.D = std::exp(logD);
    est.Dprime = std::exp(logDprime);
    est.fit_ok = est.lambda > 0.0 && est.lambda < 1.0 && est.residual < opt.residual_threshold;
    return est;
}

/// Largest observed d(psi u, psi w) / d(u, w) over random positive pairs, with
/// psi = psi(1, b).
inline double projective_contraction(const Propagator& prop, const HullPoint& b, int trials, Rng& rng) {
    const int n = prop.size();
    // Columns 2k and 2k+1 hold the k-th pair; one batched advance, or the
    // dense map when that is cheaper.
    Eigen::MatrixXd pairs(n, 2 * trials);
    for (int trial = 0; trial < trials; ++trial)
        for (int i = 0; i < n; ++i) {
            pairs(i, 2 * trial) = rng.uniform(0.05, 1.0);
            pairs(i, 2 * trial + 1) = rng.uniform(0.05, 1.0);
        }
    const Eigen::MatrixXd images = 2 * trials > n ? Eigen::MatrixXd(prop.time_one_map(b) * pairs)
                                                  : prop.advance(b, 0.0, 1.0, pairs);
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const double before = hilbert_metric(pairs.col(2 * trial), pairs.col(2 * trial + 1));
        if (!(before > 0.0)) continue;
        const double after = hilbert_metric(images.col(2 * trial), images.col(2 * trial + 1));
        worst = std::max(worst, after / before);
    }
    return worst;
}

} // namespace floquet
