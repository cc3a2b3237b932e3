#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "floquet/coefficient_hull.hpp"
#include "floquet/elliptic_operator.hpp"
#include "floquet/error.hpp"
#include "floquet/mesh.hpp"

namespace floquet {

enum class Scheme {
    /// exp(dt/2 a0) * (I - dt L)^{-1} * exp(dt/2 a0); unconditionally positive.
    strang_implicit,
    /// Same splitting with a Crank-Nicolson diffusion substep. Diagnostic
    /// only: loses positivity once dt/h^2 is large.
    crank_nicolson,
};

inline std::string_view to_string(Scheme s) {
    return s == Scheme::strang_implicit ? "strang" : "crank-nicolson";
}

struct PropagatorConfig {
    /// Must be 1/q for an integer q so that time-1 maps compose exactly.
    double dt = 1e-3;
    Scheme scheme = Scheme::strang_implicit;
    /// Relative residual accepted from the factorized diffusion solve.
    double solve_tolerance = 1e-10;
    long long max_steps = 100'000'000;
};

/// One diffusion substep F of length h. With S = W - theta h W L
/// (symmetric positive definite, an M-matrix) and R = W (implicit Euler) or
/// R = W + (1 - theta) h W L (Crank-Nicolson), F = S^{-1} R.
class DiffusionFactor {
public:
    using ColMatrix = Eigen::SparseMatrix<double>;
    using Cholesky = Eigen::SimplicialLLT<ColMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

    DiffusionFactor(const EllipticOperator& op, double h, Scheme scheme, double tolerance)
        : weights_(op.symmetrizer()) {
        const int n = op.size();
        const double theta = scheme == Scheme::strang_implicit ? 1.0 : 0.5;
        ColMatrix wl = ColMatrix(weights_.asDiagonal() * op.matrix);
        ColMatrix w(n, n);
        w.setIdentity();
        w = weights_.asDiagonal() * w;
        ColMatrix s = w - (theta * h) * wl;
        s = 0.5 * (s + ColMatrix(s.transpose()));
        if (scheme == Scheme::crank_nicolson) {
            rhs_ = w + ((1.0 - theta) * h) * wl;
            rhs_ = 0.5 * (rhs_ + ColMatrix(rhs_.transpose()));
        }
        implicit_ = scheme == Scheme::strang_implicit;

        auto llt = std::make_shared<Cholesky>();
        llt->compute(s);
        if (llt->info() != Eigen::Success)
            throw NumericalError("diffusion solve: Cholesky factorization failed (matrix not SPD)", {h});
        const Eigen::VectorXd probe = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
        const Eigen::VectorXd x = llt->solve(probe);
        const double residual = (s * x - probe).norm() / probe.norm();
        if (!(residual <= tolerance))
            throw NumericalError("diffusion solve: residual " + std::to_string(residual) + " above tolerance",
                                 {h, residual});
        llt_ = std::move(llt);
    }

    template <class Derived>
    Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& u) const {
        if (implicit_) return llt_->solve(weights_.asDiagonal() * u);
        return llt_->solve(rhs_ * u);
    }

    /// Adjoint in the weighted pairing: W^{-1} F^T W = W^{-1} R^T S^{-1} W.
    template <class Derived>
    Eigen::MatrixXd apply_adjoint(const Eigen::MatrixBase<Derived>& w) const {
        Eigen::MatrixXd y = llt_->solve(weights_.asDiagonal() * w);
        if (implicit_) return weights_.cwiseInverse().asDiagonal() * (weights_.asDiagonal() * y);
        return weights_.cwiseInverse().asDiagonal() * (ColMatrix(rhs_.transpose()) * y);
    }

private:
    Eigen::VectorXd weights_;
    ColMatrix rhs_;
    bool implicit_ = true;
    std::shared_ptr<const Cholesky> llt_;
};

/// Recorded states u(t_k) of one forward run.
struct Trajectory {
    HullPoint b;
    std::vector<double> times;
    std::vector<State> states;
};

/// Discrete solution operator psi(t, b) of u_t = div(a grad u) + a0(t, x) u
/// with Robin boundary data. psi(t, b) evaluates the coefficient of hull point
/// b on [0, t]; propagate(b, t0, t1, .) is psi(t1 - t0, translate(b, t0)).
///
/// Immutable after construction; every method is const and safe to call
/// concurrently.
class Propagator {
public:
    Propagator(EllipticOperator op, CoefficientField field, PropagatorConfig config = {})
        : op_(std::move(op)), field_(std::move(field)), config_(config) {
        if (!(config_.dt > 0.0) || !std::isfinite(config_.dt))
            throw ConfigError("propagation.dt: must be positive");
        const double q = std::round(1.0 / config_.dt);
        if (q < 1.0 || std::abs(q * config_.dt - 1.0) > 1e-12)
            throw ConfigError("propagation.dt: must equal 1/q for an integer q");
        steps_per_unit_ = static_cast<long long>(q);
        if (field_.size() != op_.size()) throw ConfigError("coefficient: field size does not match mesh");
        factor_ = std::make_shared<const DiffusionFactor>(op_, config_.dt, config_.scheme, config_.solve_tolerance);
    }

    const SpatialMesh& mesh() const noexcept { return op_.mesh; }
    const EllipticOperator& op() const noexcept { return op_; }
    const CoefficientField& field() const noexcept { return field_; }
    const PropagatorConfig& config() const noexcept { return config_; }
    int size() const noexcept { return op_.size(); }
    long long steps_per_unit() const noexcept { return steps_per_unit_; }

    /// One split step of length config().dt starting at time t.
    State step(const State& u, const HullPoint& b, double t) const { return step_impl(u, b, t, config_.dt, *factor_); }

    /// One split step of arbitrary length h (assembles a fresh diffusion factor
    /// unless h equals the configured dt).
    State step(const State& u, const HullPoint& b, double t, double h) const {
        if (h == config_.dt) return step(u, b, t);
        const DiffusionFactor f(op_, h, config_.scheme, config_.solve_tolerance);
        return step_impl(u, b, t, h, f);
    }

    /// Final state of the run from t0 to t1. Works column-wise on matrices.
    template <class Derived>
    Eigen::MatrixXd advance(const HullPoint& b, double t0, double t1, const Eigen::MatrixBase<Derived>& u0) const {
        const auto plan = schedule(t0, t1);
        Eigen::MatrixXd u = u0;
        for (long long k = 0; k < plan.full_steps; ++k) u = step_impl(u, b, t0 + k * config_.dt, config_.dt, *factor_);
        if (plan.remainder > 0.0) {
            const DiffusionFactor f(op_, plan.remainder, config_.scheme, config_.solve_tolerance);
            u = step_impl(u, b, t0 + plan.full_steps * config_.dt, plan.remainder, f);
        }
        return u;
    }

    State advance(const HullPoint& b, double t0, double t1, const State& u0) const {
        return advance(b, t0, t1, u0.matrix()).col(0);
    }

    /// Forward run recording every `stride`-th state plus the final one.
    Trajectory propagate(const HullPoint& b, double t0, double t1, const State& u0, long long stride = 1) const {
        if (stride < 1) throw ConfigError("trajectory stride must be at least 1");
        const auto plan = schedule(t0, t1);
        Trajectory traj;
        traj.b = b;
        traj.times.push_back(t0);
        traj.states.push_back(u0);
        State u = u0;
        for (long long k = 0; k < plan.full_steps; ++k) {
            u = step_impl(u, b, t0 + k * config_.dt, config_.dt, *factor_).col(0);
            const bool last = k + 1 == plan.full_steps && plan.remainder == 0.0;
            if ((k + 1) % stride == 0 || last) {
                traj.times.push_back(t0 + (k + 1) * config_.dt);
                traj.states.push_back(u);
            }
        }
        if (plan.remainder > 0.0) {
            const DiffusionFactor f(op_, plan.remainder, config_.scheme, config_.solve_tolerance);
            u = step_impl(u, b, t0 + plan.full_steps * config_.dt, plan.remainder, f).col(0);
            traj.times.push_back(t1);
            traj.states.push_back(u);
        }
        return traj;
    }

    /// Dense psi(1, b).
    Eigen::MatrixXd time_one_map(const HullPoint& b) const {
        return advance(b, 0.0, 1.0, Eigen::MatrixXd::Identity(size(), size()));
    }

    /// Exact adjoint of advance(b, t0, t1, .) in the weighted pairing: the
    /// step sequence reversed, each factor replaced by its adjoint.
    template <class Derived>
    Eigen::MatrixXd advance_adjoint(const HullPoint& b, double t0, double t1,
                                    const Eigen::MatrixBase<Derived>& w0) const {
        const auto plan = schedule(t0, t1);
        Eigen::MatrixXd w = w0;
        if (plan.remainder > 0.0) {
            const DiffusionFactor f(op_, plan.remainder, config_.scheme, config_.solve_tolerance);
            w = step_adjoint_impl(w, b, t0 + plan.full_steps * config_.dt, plan.remainder, f);
        }
        for (long long k = plan.full_steps - 1; k >= 0; --k)
            w = step_adjoint_impl(w, b, t0 + k * config_.dt, config_.dt, *factor_);
        return w;
    }

    State propagate_adjoint(const HullPoint& b, double t0, double t1, const State& w) const {
        return advance_adjoint(b, t0, t1, w.matrix()).col(0);
    }

private:
    struct Schedule {
        long long full_steps = 0;
        double remainder = 0.0;
    };

    Schedule schedule(double t0, double t1) const {
        if (!(t1 >= t0)) throw ConfigError("propagate: t1 must not precede t0");
        const double span = t1 - t0;
        const double ratio = span / config_.dt;
        Schedule plan;
        const double nearest = std::round(ratio);
        if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
            plan.full_steps = static_cast<long long>(nearest);
        } else {
            plan.full_steps = static_cast<long long>(std::floor(ratio));
            plan.remainder = span - plan.full_steps * config_.dt;
        }
        if (plan.full_steps > config_.max_steps)
            throw ConfigError("propagation.max_steps: run needs " + std::to_string(plan.full_steps) + " steps");
        return plan;
    }

    Eigen::VectorXd reaction(const HullPoint& b, double t, double half) const {
        return (half * field_.sample(b, t).array()).exp().matrix();
    }

    template <class Derived>
    Eigen::MatrixXd step_impl(const Eigen::MatrixBase<Derived>& u, const HullPoint& b, double t, double h,
                              const DiffusionFactor& f) const {
        const double half = 0.5 * h;
        Eigen::MatrixXd v = reaction(b, t + 0.25 * h, half).asDiagonal() * u;
        v = f.apply(v);
        v = reaction(b, t + 0.75 * h, half).asDiagonal() * v;
        check_finite(v, t);
        return v;
    }

    template <class Derived>
    Eigen::MatrixXd step_adjoint_impl(const Eigen::MatrixBase<Derived>& w, const HullPoint& b, double t, double h,
                                      const DiffusionFactor& f) const {
        const double half = 0.5 * h;
        Eigen::MatrixXd v = reaction(b, t + 0.75 * h, half).asDiagonal() * w;
        v = f.apply_adjoint(v);
        v = reaction(b, t + 0.25 * h, half).asDiagonal() * v;
        check_finite(v, t);
        return v;
    }

    static void check_finite(const Eigen::MatrixXd& v, double t) {
        if (!v.allFinite()) throw NumericalError("propagate: non-finite state (overflow or failed solve)", {t});
    }

    EllipticOperator op_;
    CoefficientField field_;
    PropagatorConfig config_;
    long long steps_per_unit_ = 1;
    std::shared_ptr<const DiffusionFactor> factor_;
};

/// Relative defect between psi(t1 + t2, b) u0 and psi(t1, translate(b, t2)) psi(t2, b) u0,
/// in the discrete L1 norm.
inline double verify_cocycle(const Propagator& prop, const HullPoint& b, double t1, double t2, const State& u0) {
    const State direct = prop.advance(b, 0.0, t1 + t2, u0);
    const State first = prop.advance(b, 0.0, t2, u0);
    const State composed = prop.advance(prop.field().translate(b, t2), 0.0, t1, first);
    const double scale = l1_norm(prop.mesh(), direct);
    const double defect = l1_norm(prop.mesh(), direct - composed);
    return scale > 0.0 ? defect / scale : defect;
}

} // namespace floquet
