#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace floquet {

/// Hilbert projective distance log(max_i(u_i/w_i) / min_i(u_i/w_i)) between
/// nonnegative vectors. Nodes where both vanish are ignored; infinity when
/// the supports differ, an entry is negative, or either vector is zero.
inline double hilbert_metric(const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (u.size() != w.size()) return inf;
    double hi = -inf;
    double lo = inf;
    bool any = false;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double a = u[i];
        const double b = w[i];
        if (!(a >= 0.0) || !(b >= 0.0)) return inf;
        if (a == 0.0 && b == 0.0) continue;
        if (a == 0.0 || b == 0.0) return inf;
        // log-ratios stay accurate when the entries span many decades
        const double r = std::log(a) - std::log(b);
        hi = std::max(hi, r);
        lo = std::min(lo, r);
        any = true;
    }
    return any ? hi - lo : inf;
}

/// max_i(u_i/w_i) / min_i(u_i/w_i) - 1, the relative spread of the ratio.
inline double ratio_oscillation(const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    return std::expm1(hilbert_metric(u, w));
}

/// Birkhoff contraction coefficient tanh(diam / 4) of an entrywise positive
/// matrix, diam the projective diameter of its columns.
inline double birkhoff_coefficient(const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd logs = a.array().log().matrix();
    double diam = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index l = j + 1; l < a.cols(); ++l) {
            const Eigen::VectorXd r = logs.col(j) - logs.col(l);
            diam = std::max(diam, r.maxCoeff() - r.minCoeff());
        }
    }
    return std::tanh(0.25 * diam);
}

} // namespace floquet
