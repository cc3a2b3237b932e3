#pragma once

#include <Eigen/Core>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "floquet/error.hpp"
#include "floquet/mesh.hpp"
#include "floquet/random.hpp"

namespace floquet {

inline constexpr int kMaxFrequencies = 3;

/// Point of a torus hull: one phase per temporal frequency, each in [0, 1).
struct HullPoint {
    std::array<double, kMaxFrequencies> phase{};
    int dims = 0;

    double operator[](int j) const { return phase[j]; }
};

/// Fractional part in [0, 1).
inline double wrap_phase(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r = 0.0;
    return r;
}

/// Circular distance between two hull points (max over coordinates).
inline double phase_distance(const HullPoint& a, const HullPoint& b) {
    double d = 0.0;
    for (int j = 0; j < a.dims; ++j) {
        const double diff = std::abs(a.phase[j] - b.phase[j]);
        d = std::max(d, std::min(diff, 1.0 - diff));
    }
    return d;
}

/// Named spatial profile. Built-ins:
///   const(v)                         v
///   cos-kx(amplitude, k)             amplitude * cos(k pi x / l_x)
///   gaussian-bump(amplitude, c, w)   amplitude * exp(-(x - c)^2 / (2 w^2))          (1-D)
///   gaussian-bump(amplitude, cx, cy, w)                                              (2-D)
struct SpatialProfile {
    std::string name = "const";
    std::vector<double> params{0.0};

    double operator()(const SpatialMesh& mesh, double x, double y) const {
        if (name == "const") return params.at(0);
        if (name == "cos-kx") return params.at(0) * std::cos(params.at(1) * std::numbers::pi * x / mesh.extent[0]);
        // gaussian-bump
        if (mesh.dimension == 1) {
            const double dx = x - params.at(1);
            return params.at(0) * std::exp(-dx * dx / (2.0 * params.at(2) * params.at(2)));
        }
        const double dx = x - params.at(1);
        const double dy = y - params.at(2);
        return params.at(0) * std::exp(-(dx * dx + dy * dy) / (2.0 * params.at(3) * params.at(3)));
    }

    Eigen::VectorXd sample(const SpatialMesh& mesh) const {
        Eigen::VectorXd out(mesh.size());
        for (int k = 0; k < mesh.size(); ++k) out[k] = (*this)(mesh, mesh.coords[k][0], mesh.coords[k][1]);
        return out;
    }

    std::string str() const {
        std::ostringstream os;
        os.precision(17);
        os << name << '(';
        for (std::size_t k = 0; k < params.size(); ++k) os << (k ? ", " : "") << params[k];
        os << ')';
        return os.str();
    }
};

/// Parses "name(p1, p2, ...)". `dimension` selects the gaussian-bump arity.
inline SpatialProfile parse_profile(std::string_view text, int dimension = 1) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    const auto open = text.find('(');
    if (open == std::string_view::npos || text.back() != ')')
        throw ConfigError("profile '" + std::string(text) + "': expected name(args)");
    SpatialProfile p;
    p.name = std::string(trim(text.substr(0, open)));
    p.params.clear();
    std::string_view args = text.substr(open + 1, text.size() - open - 2);
    while (!trim(args).empty()) {
        const auto comma = args.find(',');
        const std::string token(trim(args.substr(0, comma)));
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || token.empty())
            throw ConfigError("profile '" + std::string(text) + "': bad number '" + token + "'");
        p.params.push_back(value);
        if (comma == std::string_view::npos) break;
        args.remove_prefix(comma + 1);
    }
    std::size_t arity = 0;
    if (p.name == "const") arity = 1;
    else if (p.name == "cos-kx") arity = 2;
    else if (p.name == "gaussian-bump") arity = dimension == 1 ? 3 : 4;
    else throw ConfigError("profile '" + p.name + "': unknown (expected const, cos-kx, gaussian-bump)");
    if (p.params.size() != arity)
        throw ConfigError("profile '" + p.name + "': expected " + std::to_string(arity) + " arguments");
    if (p.name == "gaussian-bump" && !(p.params.back() > 0.0))
        throw ConfigError("profile 'gaussian-bump': width must be positive");
    return p;
}

enum class CoefficientKind { constant, periodic, quasi_periodic };

inline std::string_view to_string(CoefficientKind kind) {
    switch (kind) {
    case CoefficientKind::constant: return "constant";
    case CoefficientKind::periodic: return "periodic";
    case CoefficientKind::quasi_periodic: return "quasi-periodic";
    }
    return "?";
}

/// Zero-order coefficient on a torus hull,
///   a0(t, x) = g0(x) + sum_j sin(2 pi (theta_j + omega_j t)) g_j(x),
/// sampled on the mesh nodes. The reference coefficient is theta = 0.
class CoefficientField {
public:
    CoefficientField() = default;

    CoefficientField(CoefficientKind kind, Eigen::VectorXd offset, std::vector<Eigen::VectorXd> profiles,
                     std::vector<double> frequencies)
        : kind_(kind), offset_(std::move(offset)), profiles_(std::move(profiles)),
          frequencies_(std::move(frequencies)) {
        const auto m = frequencies_.size();
        if (profiles_.size() != m)
            throw ConfigError("coefficient.profiles: need one profile per frequency");
        if (m > kMaxFrequencies) throw ConfigError("coefficient.frequencies: at most 3 frequencies");
        const bool ok = (kind_ == CoefficientKind::constant && m == 0)
                     || (kind_ == CoefficientKind::periodic && m == 1)
                     || (kind_ == CoefficientKind::quasi_periodic && m >= 2);
        if (!ok)
            throw ConfigError("coefficient.kind: '" + std::string(to_string(kind_)) + "' incompatible with "
                              + std::to_string(m) + " frequencies");
        for (const auto& g : profiles_)
            if (g.size() != offset_.size()) throw ConfigError("coefficient.profiles: size mismatch with mesh");
        for (double w : frequencies_)
            if (!std::isfinite(w)) throw ConfigError("coefficient.frequencies: must be finite");
        // Phases are independent on the torus, so each sine reaches +-1
        // simultaneously and the supremum is attained nodewise.
        Eigen::ArrayXd bound = offset_.array().abs();
        for (const auto& g : profiles_) bound += g.array().abs();
        bound_ = offset_.size() ? bound.maxCoeff() : 0.0;
        if (!std::isfinite(bound_)) throw ConfigError("coefficient: amplitude bound is not finite");
    }

    /// Spatially constant, time-independent coefficient.
    static CoefficientField constant(const SpatialMesh& mesh, double value) {
        return CoefficientField(CoefficientKind::constant, Eigen::VectorXd::Constant(mesh.size(), value), {}, {});
    }

    CoefficientKind kind() const noexcept { return kind_; }
    int frequency_count() const noexcept { return static_cast<int>(frequencies_.size()); }
    const std::vector<double>& frequencies() const noexcept { return frequencies_; }
    const Eigen::VectorXd& offset() const noexcept { return offset_; }
    const std::vector<Eigen::VectorXd>& profiles() const noexcept { return profiles_; }
    int size() const noexcept { return static_cast<int>(offset_.size()); }

    /// ess-sup of |a0| over the hull and the mesh.
    double bound() const noexcept { return bound_; }

    HullPoint reference() const {
        HullPoint b;
        b.dims = frequency_count();
        return b;
    }

    HullPoint translate(const HullPoint& b, double t) const {
        HullPoint out = b;
        for (int j = 0; j < b.dims; ++j) out.phase[j] = wrap_phase(b.phase[j] + frequencies_[j] * t);
        return out;
    }

    double evaluate(const HullPoint& b, double t, int node) const {
        double value = offset_[node];
        for (int j = 0; j < frequency_count(); ++j) value += temporal(b, t, j) * profiles_[j][node];
        return value;
    }

    /// a0 at time t for every node.
    Eigen::VectorXd sample(const HullPoint& b, double t) const {
        Eigen::VectorXd value = offset_;
        for (int j = 0; j < frequency_count(); ++j) value += temporal(b, t, j) * profiles_[j];
        return value;
    }

    /// True when every profile is constant in space, i.e. a0 = f(t) commutes
    /// with the diffusion.
    bool is_space_independent() const {
        auto flat = [](const Eigen::VectorXd& g) { return g.size() == 0 || (g.array() == g[0]).all(); };
        if (!flat(offset_)) return false;
        for (const auto& g : profiles_)
            if (!flat(g)) return false;
        return true;
    }

private:
    double temporal(const HullPoint& b, double t, int j) const {
        return std::sin(2.0 * std::numbers::pi * wrap_phase(b.phase[j] + frequencies_[j] * t));
    }

    CoefficientKind kind_ = CoefficientKind::constant;
    Eigen::VectorXd offset_;
    std::vector<Eigen::VectorXd> profiles_;
    std::vector<double> frequencies_;
    double bound_ = 0.0;
};

/// Pointwise product a0(b.t, x) u(x).
inline State multiply_state(const CoefficientField& field, const HullPoint& b, double t, const State& u) {
    return field.sample(b, t).cwiseProduct(u);
}

enum class HullSampling { grid, random };

/// Hull points covering the torus. Grid mode: k/count for one frequency, a
/// Kronecker (R_d) sequence for two or three. Random mode: uniform phases
/// from a stream seeded with `seed`.
inline std::vector<HullPoint> hull_sample(const CoefficientField& field, int count, std::uint64_t seed,
                                          HullSampling mode = HullSampling::grid) {
    if (count < 1) throw ConfigError("experiment.hull_samples: must be at least 1");
    const int m = field.frequency_count();
    std::vector<HullPoint> out(count, field.reference());
    if (m == 0) return out;
    if (mode == HullSampling::random) {
        Rng rng(seed);
        for (auto& b : out)
            for (int j = 0; j < m; ++j) b.phase[j] = rng.uniform();
        return out;
    }
    if (m == 1) {
        for (int k = 0; k < count; ++k) out[k].phase[0] = static_cast<double>(k) / count;
        return out;
    }
    // Root of x^(m+1) = x + 1 generalizes the golden ratio.
    double g = 2.0;
    for (int it = 0; it < 64; ++it) g = std::pow(1.0 + g, 1.0 / (m + 1));
    for (int k = 0; k < count; ++k)
        for (int j = 0; j < m; ++j) out[k].phase[j] = wrap_phase(k / std::pow(g, j + 1));
    return out;
}

} // namespace floquet
