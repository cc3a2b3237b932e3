#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "floquet/bundle.hpp"
#include "floquet/coefficient_hull.hpp"
#include "floquet/elliptic_operator.hpp"
#include "floquet/error.hpp"
#include "floquet/mesh.hpp"
#include "floquet/propagation.hpp"
#include "floquet/toml_subset.hpp"

namespace floquet {

/// Every problem found while validating a scenario, each prefixed with the
/// config path of the offending key.
class ConfigValidationError : public ConfigError {
public:
    explicit ConfigValidationError(std::vector<std::string> issues)
        : ConfigError(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string s = "invalid config:";
        for (const auto& i : issues) s += "\n  " + i;
        return s;
    }
    std::vector<std::string> issues_;
};

enum class Experiment { spectrum, simulate, bundle, separation, uniqueness, membership };

inline constexpr std::array<std::string_view, 6> kExperimentNames{"spectrum",   "simulate",   "bundle",
                                                                  "separation", "uniqueness", "membership"};

inline std::string_view to_string(Experiment e) { return kExperimentNames[static_cast<int>(e)]; }

struct MeshBlock {
    int dimension = 1;
    std::vector<double> extent;
    std::vector<int> counts;
};

struct OperatorBlock {
    SpatialProfile a{"const", {1.0}};
    /// 1-D: {left, right}. 2-D: {left, right, bottom, top}; corner nodes take
    /// the left/right value.
    std::vector<double> c;
};

struct CoefficientBlock {
    CoefficientKind kind = CoefficientKind::constant;
    SpatialProfile offset{"const", {0.0}};
    std::vector<SpatialProfile> profiles;
    std::vector<double> frequencies;
    std::vector<double> amplitudes;
};

struct ExperimentBlock {
    std::vector<Experiment> run{Experiment::spectrum};
    std::uint64_t seed = 0;
    int spectrum_count = 6;
    double t_final = 1.0;
    long long stride = 100;
    SpatialProfile initial{"const", {1.0}};
    int hull_samples = 16;
    HullSampling hull_mode = HullSampling::grid;
    FiberOptions fiber;
    SeparationOptions separation;
    int contraction_trials = 64;
    std::vector<double> t_back{2.0, 4.0, 8.0, 16.0};
    double t_fwd = 1.0;
    int seed_pairs = 1;
    double membership_t_back = 8.0;
    double membership_t_fwd = 4.0;
};

struct ScenarioConfig {
    std::string name = "scenario";
    MeshBlock mesh;
    OperatorBlock op;
    CoefficientBlock coefficient;
    PropagatorConfig propagation;
    ExperimentBlock experiment;
    std::string output_dir = "out";
    /// Parsed document with defaults injected, echoed into the manifest.
    toml::Value echo;
};

namespace detail {

class Validator {
public:
    explicit Validator(toml::Value& root) : root_(root) {}

    std::vector<std::string> issues;

    void error(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

    /// Table at `name`, created empty when absent; unknown keys are reported.
    toml::Value& table(const std::string& name, std::initializer_list<std::string_view> allowed) {
        if (!root_.contains(name)) root_[name] = toml::Value::object();
        toml::Value& t = root_[name];
        if (!t.is_object()) {
            error(name, "must be a table");
            t = toml::Value::object();
        }
        for (auto it = t.begin(); it != t.end(); ++it)
            if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
                error(name + "." + it.key(), "unknown key");
        return t;
    }

    bool require(toml::Value& t, const std::string& table_name, const std::string& key) {
        if (t.contains(key)) return true;
        error(table_name + "." + key, "missing required key");
        return false;
    }

    double number(toml::Value& t, const std::string& tn, const std::string& key, double fallback) {
        if (!t.contains(key)) t[key] = fallback;
        if (!t[key].is_number()) {
            error(tn + "." + key, "must be a number");
            return fallback;
        }
        return t[key].get<double>();
    }

    long long integer(toml::Value& t, const std::string& tn, const std::string& key, long long fallback) {
        if (!t.contains(key)) t[key] = fallback;
        if (!t[key].is_number_integer()) {
            error(tn + "." + key, "must be an integer");
            return fallback;
        }
        return t[key].get<long long>();
    }

    std::string string(toml::Value& t, const std::string& tn, const std::string& key, const std::string& fallback) {
        if (!t.contains(key)) t[key] = fallback;
        if (!t[key].is_string()) {
            error(tn + "." + key, "must be a string");
            return fallback;
        }
        return t[key].get<std::string>();
    }

    std::vector<double> numbers(toml::Value& t, const std::string& tn, const std::string& key,
                                const std::vector<double>& fallback) {
        if (!t.contains(key)) t[key] = fallback;
        std::vector<double> out;
        const toml::Value& v = t[key];
        if (v.is_number()) return {v.get<double>()};
        if (!v.is_array()) {
            error(tn + "." + key, "must be an array of numbers");
            return fallback;
        }
        for (const auto& x : v) {
            if (!x.is_number()) {
                error(tn + "." + key, "must be an array of numbers");
                return fallback;
            }
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::vector<std::string> strings(toml::Value& t, const std::string& tn, const std::string& key,
                                     const std::vector<std::string>& fallback) {
        if (!t.contains(key)) t[key] = fallback;
        std::vector<std::string> out;
        const toml::Value& v = t[key];
        if (!v.is_array()) {
            error(tn + "." + key, "must be an array of strings");
            return fallback;
        }
        for (const auto& x : v) {
            if (!x.is_string()) {
                error(tn + "." + key, "must be an array of strings");
                return fallback;
            }
            out.push_back(x.get<std::string>());
        }
        return out;
    }

    SpatialProfile profile(const std::string& path, const std::string& text, int dimension) {
        try {
            return parse_profile(text, dimension);
        } catch (const ConfigError& e) {
            error(path, e.what());
            return {};
        }
    }

private:
    toml::Value& root_;
};

} // namespace detail

/// Parses and validates a scenario. Collects every problem before throwing
/// ConfigValidationError; unknown keys are errors.
inline ScenarioConfig parse_config(std::string_view text) {
    ScenarioConfig cfg;
    toml::Value root = toml::parse(text);
    detail::Validator v(root);
    for (auto it = root.begin(); it != root.end(); ++it) {
        static const std::set<std::string> top{"scenario", "mesh", "operator", "coefficient", "propagation",
                                               "experiment", "output"};
        if (!top.count(it.key())) v.error(it.key(), "unknown table");
    }

    auto& sc = v.table("scenario", {"name"});
    cfg.name = v.string(sc, "scenario", "name", cfg.name);

    // mesh
    auto& mt = v.table("mesh", {"dimension", "extent", "counts"});
    cfg.mesh.dimension = static_cast<int>(v.integer(mt, "mesh", "dimension", 1));
    const bool dim_ok = cfg.mesh.dimension == 1 || cfg.mesh.dimension == 2;
    if (!dim_ok) v.error("mesh.dimension", "must be 1 or 2");
    bool mesh_ok = dim_ok;
    if (v.require(mt, "mesh", "extent")) {
        cfg.mesh.extent = v.numbers(mt, "mesh", "extent", {});
        if (dim_ok && static_cast<int>(cfg.mesh.extent.size()) != cfg.mesh.dimension) {
            v.error("mesh.extent", "needs one entry per axis");
            mesh_ok = false;
        }
        for (double e : cfg.mesh.extent)
            if (!(e > 0.0) || !std::isfinite(e)) {
                v.error("mesh.extent", "must be positive and finite");
                mesh_ok = false;
                break;
            }
    } else {
        mesh_ok = false;
    }
    if (v.require(mt, "mesh", "counts")) {
        for (double c : v.numbers(mt, "mesh", "counts", {})) cfg.mesh.counts.push_back(static_cast<int>(c));
        if (dim_ok && static_cast<int>(cfg.mesh.counts.size()) != cfg.mesh.dimension) {
            v.error("mesh.counts", "needs one entry per axis");
            mesh_ok = false;
        }
        for (int c : cfg.mesh.counts)
            if (c < 3) {
                v.error("mesh.counts", "needs at least 3 nodes per axis, got " + std::to_string(c));
                mesh_ok = false;
                break;
            }
    } else {
        mesh_ok = false;
    }
    const int dim = dim_ok ? cfg.mesh.dimension : 1;

    // operator
    auto& ot = v.table("operator", {"a", "c"});
    cfg.op.a = v.profile("operator.a", v.string(ot, "operator", "a", "const(1)"), dim);
    const std::size_t sides = dim == 1 ? 2 : 4;
    cfg.op.c = v.numbers(ot, "operator", "c", std::vector<double>(sides, 0.0));
    if (cfg.op.c.size() == 1) cfg.op.c.assign(sides, cfg.op.c[0]);
    if (cfg.op.c.size() != sides) v.error("operator.c", "expected 1 or " + std::to_string(sides) + " values");
    for (double c : cfg.op.c)
        if (!(c >= 0.0) || !std::isfinite(c)) {
            v.error("operator.c", "Robin coefficient must be nonnegative, got " + std::to_string(c));
            break;
        }
    if (mesh_ok) {
        const auto mesh = build_mesh(dim, cfg.mesh.extent, cfg.mesh.counts);
        for (int axis = 0; axis < dim; ++axis)
            for (int k = 0; k < half_point_count(mesh, axis); ++k) {
                const auto p = half_point(mesh, axis, k);
                const double a = cfg.op.a(mesh, p[0], p[1]);
                if (!(a > 0.0) || !std::isfinite(a)) {
                    v.error("operator.a", "diffusion must be positive on the mesh");
                    axis = dim;
                    break;
                }
            }
    }

    // coefficient
    auto& ct = v.table("coefficient", {"kind", "offset", "profiles", "frequencies", "amplitudes"});
    const auto kind = v.string(ct, "coefficient", "kind", "constant");
    if (kind == "constant") cfg.coefficient.kind = CoefficientKind::constant;
    else if (kind == "periodic") cfg.coefficient.kind = CoefficientKind::periodic;
    else if (kind == "quasi-periodic") cfg.coefficient.kind = CoefficientKind::quasi_periodic;
    else v.error("coefficient.kind", "expected constant, periodic or quasi-periodic");
    cfg.coefficient.offset = v.profile("coefficient.offset", v.string(ct, "coefficient", "offset", "const(0)"), dim);
    for (const auto& p : v.strings(ct, "coefficient", "profiles", {}))
        cfg.coefficient.profiles.push_back(v.profile("coefficient.profiles", p, dim));
    cfg.coefficient.frequencies = v.numbers(ct, "coefficient", "frequencies", {});
    const std::size_t m = cfg.coefficient.frequencies.size();
    cfg.coefficient.amplitudes = v.numbers(ct, "coefficient", "amplitudes", std::vector<double>(m, 1.0));
    if (m > kMaxFrequencies) v.error("coefficient.frequencies", "at most 3 frequencies");
    if (cfg.coefficient.profiles.size() != m)
        v.error("coefficient.profiles", "need exactly one profile per frequency");
    if (cfg.coefficient.amplitudes.size() != m)
        v.error("coefficient.amplitudes", "need exactly one amplitude per frequency");
    const bool kind_ok = (cfg.coefficient.kind == CoefficientKind::constant && m == 0)
                      || (cfg.coefficient.kind == CoefficientKind::periodic && m == 1)
                      || (cfg.coefficient.kind == CoefficientKind::quasi_periodic && m >= 2);
    if (!kind_ok) v.error("coefficient.kind", "'" + kind + "' does not match " + std::to_string(m) + " frequencies");

    // propagation
    auto& pt = v.table("propagation", {"dt", "scheme", "solve_tolerance", "max_steps"});
    cfg.propagation.dt = v.number(pt, "propagation", "dt", 1e-3);
    {
        const double q = std::round(1.0 / cfg.propagation.dt);
        if (!(cfg.propagation.dt > 0.0) || q < 1.0 || std::abs(q * cfg.propagation.dt - 1.0) > 1e-12)
            v.error("propagation.dt", "must equal 1/q for a positive integer q");
    }
    const auto scheme = v.string(pt, "propagation", "scheme", "strang");
    if (scheme == "strang") cfg.propagation.scheme = Scheme::strang_implicit;
    else if (scheme == "crank-nicolson") cfg.propagation.scheme = Scheme::crank_nicolson;
    else v.error("propagation.scheme", "expected strang or crank-nicolson");
    cfg.propagation.solve_tolerance = v.number(pt, "propagation", "solve_tolerance", 1e-10);
    if (!(cfg.propagation.solve_tolerance > 0.0)) v.error("propagation.solve_tolerance", "must be positive");
    cfg.propagation.max_steps = v.integer(pt, "propagation", "max_steps", 100'000'000);
    if (cfg.propagation.max_steps < 1) v.error("propagation.max_steps", "must be positive");

    // experiment
    auto& et = v.table("experiment", {"run", "seed", "spectrum_count", "t_final", "stride", "initial", "hull_samples",
                                      "hull_mode", "fiber_tol", "fiber_max_t", "k_max", "trials", "substeps",
                                      "fit_threshold", "contraction_trials", "t_back", "t_fwd", "seed_pairs",
                                      "membership_t_back", "membership_t_fwd"});
    auto& ex = cfg.experiment;
    ex.run.clear();
    for (const auto& name : v.strings(et, "experiment", "run", {"spectrum"})) {
        auto it = std::find(kExperimentNames.begin(), kExperimentNames.end(), name);
        if (it == kExperimentNames.end()) v.error("experiment.run", "unknown experiment '" + name + "'");
        else ex.run.push_back(static_cast<Experiment>(it - kExperimentNames.begin()));
    }
    const long long seed = v.integer(et, "experiment", "seed", 0);
    if (seed < 0) v.error("experiment.seed", "must be nonnegative");
    ex.seed = static_cast<std::uint64_t>(std::max(0LL, seed));
    auto positive_int = [&](const char* key, long long fallback) {
        const long long x = v.integer(et, "experiment", key, fallback);
        if (x < 1) v.error(std::string("experiment.") + key, "must be at least 1");
        return static_cast<int>(std::max(1LL, x));
    };
    auto positive = [&](const char* key, double fallback) {
        const double x = v.number(et, "experiment", key, fallback);
        if (!(x > 0.0)) v.error(std::string("experiment.") + key, "must be positive");
        return x;
    };
    auto nonnegative = [&](const char* key, double fallback) {
        const double x = v.number(et, "experiment", key, fallback);
        if (!(x >= 0.0)) v.error(std::string("experiment.") + key, "must be nonnegative");
        return x;
    };
    ex.spectrum_count = positive_int("spectrum_count", ex.spectrum_count);
    ex.t_final = nonnegative("t_final", ex.t_final);
    ex.stride = positive_int("stride", ex.stride);
    ex.initial = v.profile("experiment.initial", v.string(et, "experiment", "initial", "const(1)"), dim);
    ex.hull_samples = positive_int("hull_samples", ex.hull_samples);
    const auto mode = v.string(et, "experiment", "hull_mode", "grid");
    if (mode == "grid") ex.hull_mode = HullSampling::grid;
    else if (mode == "random") ex.hull_mode = HullSampling::random;
    else v.error("experiment.hull_mode", "expected grid or random");
    ex.fiber.tol = positive("fiber_tol", ex.fiber.tol);
    ex.fiber.max_T = positive_int("fiber_max_t", ex.fiber.max_T);
    ex.separation.fiber = ex.fiber;
    ex.separation.k_max = positive_int("k_max", ex.separation.k_max);
    if (ex.separation.k_max <= ex.separation.k_min)
        v.error("experiment.k_max", "must exceed " + std::to_string(ex.separation.k_min));
    ex.separation.trials = positive_int("trials", ex.separation.trials);
    ex.separation.substeps = positive_int("substeps", ex.separation.substeps);
    ex.separation.residual_threshold = positive("fit_threshold", ex.separation.residual_threshold);
    ex.contraction_trials = positive_int("contraction_trials", ex.contraction_trials);
    ex.t_back = v.numbers(et, "experiment", "t_back", ex.t_back);
    if (ex.t_back.empty()) v.error("experiment.t_back", "must not be empty");
    for (double t : ex.t_back)
        if (!(t >= 0.0)) {
            v.error("experiment.t_back", "entries must be nonnegative");
            break;
        }
    ex.t_fwd = nonnegative("t_fwd", ex.t_fwd);
    ex.seed_pairs = positive_int("seed_pairs", ex.seed_pairs);
    ex.membership_t_back = nonnegative("membership_t_back", ex.membership_t_back);
    ex.membership_t_fwd = nonnegative("membership_t_fwd", ex.membership_t_fwd);

    auto& out = v.table("output", {"dir"});
    cfg.output_dir = v.string(out, "output", "dir", cfg.output_dir);

    if (!v.issues.empty()) throw ConfigValidationError(v.issues);
    cfg.echo = root;
    return cfg;
}

inline SpatialMesh build_mesh(const ScenarioConfig& cfg) {
    return build_mesh(cfg.mesh.dimension, cfg.mesh.extent, cfg.mesh.counts);
}

inline EllipticOperator build_operator(const ScenarioConfig& cfg, const SpatialMesh& mesh) {
    const auto& c = cfg.op.c;
    auto robin = [&](double x, double y) {
        const double tol = 1e-12;
        if (std::abs(x) < tol) return c[0];
        if (std::abs(x - mesh.extent[0]) < tol) return c[1];
        if (std::abs(y) < tol) return c[2];
        return c[3];
    };
    return build_operator(mesh, [&](double x, double y) { return cfg.op.a(mesh, x, y); }, robin);
}

inline CoefficientField build_field(const ScenarioConfig& cfg, const SpatialMesh& mesh) {
    std::vector<Eigen::VectorXd> profiles;
    for (std::size_t j = 0; j < cfg.coefficient.profiles.size(); ++j)
        profiles.push_back(cfg.coefficient.amplitudes[j] * cfg.coefficient.profiles[j].sample(mesh));
    return CoefficientField(cfg.coefficient.kind, cfg.coefficient.offset.sample(mesh), std::move(profiles),
                            cfg.coefficient.frequencies);
}

inline Propagator build_propagator(const ScenarioConfig& cfg) {
    const auto mesh = build_mesh(cfg);
    return Propagator(build_operator(cfg, mesh), build_field(cfg, mesh), cfg.propagation);
}

} // namespace floquet
