#pragma once

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "floquet/bundle.hpp"
#include "floquet/config.hpp"
#include "floquet/positivity.hpp"
#include "floquet/propagation.hpp"
#include "floquet/random.hpp"

namespace floquet {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_io = 1,
    exit_config = 2,
    exit_numerical = 3,
};

/// Shortest round-trip independent formatting is not wanted here: CSVs carry
/// exactly 17 significant digits, locale-independent.
inline std::string format_number(double x) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
    return std::string(buf.data(), end);
}

/// RFC 4180 table: header row, comma separated, CRLF line ends.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add_row(header); }

    void add_row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out_ << ',';
            out_ << escape(cells[k]);
        }
        out_ << "\r\n";
    }

    void add_numbers(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_number(v));
        add_row(cells);
    }

    std::string str() const { return out_.str(); }
    std::size_t columns() const { return columns_; }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }

    std::size_t columns_;
    std::ostringstream out_;
};

inline std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

struct OutputFile {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

struct RunManifest {
    std::string scenario;
    std::string tool_version{kToolVersion};
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::vector<std::string> experiments;
    std::vector<OutputFile> outputs;
    std::vector<std::string> warnings;
    std::string status = "ok";
    std::string diagnostic;
    int exit_code = exit_ok;
    toml::Value config;

    toml::Value to_json() const {
        toml::Value j;
        j["scenario"] = scenario;
        j["tool_version"] = tool_version;
        j["seed"] = seed;
        j["started"] = started;
        j["finished"] = finished;
        j["experiments"] = experiments;
        j["status"] = status;
        j["exit_code"] = exit_code;
        if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
        j["warnings"] = warnings;
        j["outputs"] = toml::Value::array();
        for (const auto& f : outputs) j["outputs"].push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        j["config"] = config;
        return j;
    }
};

/// Adds prerequisites and sorts into execution order: separation needs
/// bundle; uniqueness and membership need both.
inline std::vector<Experiment> dependency_closure(std::vector<Experiment> requested) {
    auto has = [&](Experiment e) { return std::find(requested.begin(), requested.end(), e) != requested.end(); };
    if (has(Experiment::uniqueness) || has(Experiment::membership)) requested.push_back(Experiment::separation);
    if (has(Experiment::separation)) requested.push_back(Experiment::bundle);
    std::sort(requested.begin(), requested.end());
    requested.erase(std::unique(requested.begin(), requested.end()), requested.end());
    return requested;
}

namespace detail {

class OutputWriter {
public:
    OutputWriter(std::filesystem::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& bytes) {
        std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
        f << bytes;
        if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
        manifest_.outputs.push_back({name, sha256_hex(bytes), bytes.size()});
    }

    void write_manifest() {
        std::ofstream f(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        f << manifest_.to_json().dump(2) << '\n';
    }

private:
    std::filesystem::path dir_;
    RunManifest& manifest_;
};

inline State random_seed_state(int n, Rng& rng) {
    State s(n);
    for (int i = 0; i < n; ++i) s[i] = rng.uniform(0.05, 1.0);
    return s;
}

} // namespace detail

/// Runs the experiments of `cfg` (with prerequisites) and writes CSVs plus
/// manifest.json into cfg.output_dir. Errors end the run: the manifest
/// records the diagnostic and a nonzero exit code.
///
/// Randomness: one stream seeded from experiment.seed; each experiment gets a
/// child stream split off in a fixed order, so an experiment's draws do not
/// depend on which other experiments run.
inline RunManifest run_scenario(const ScenarioConfig& cfg) {
    RunManifest manifest;
    manifest.scenario = cfg.name;
    manifest.seed = cfg.experiment.seed;
    manifest.started = utc_timestamp();
    manifest.config = cfg.echo;
    const auto plan = dependency_closure(cfg.experiment.run);
    for (auto e : plan) manifest.experiments.emplace_back(to_string(e));

    detail::OutputWriter out(cfg.output_dir, manifest);
    Rng root(cfg.experiment.seed);
    std::array<Rng, kExperimentNames.size()> streams{root.split(), root.split(), root.split(),
                                                     root.split(), root.split(), root.split()};
    auto stream = [&](Experiment e) -> Rng& { return streams[static_cast<int>(e)]; };

    try {
        const Propagator prop = build_propagator(cfg);
        const auto& mesh = prop.mesh();
        const auto& ex = cfg.experiment;
        const int n = prop.size();
        std::vector<PrincipalFiber> fibers;
        SeparationEstimate sep;

        for (Experiment e : plan) {
            switch (e) {
            case Experiment::spectrum: {
                const auto sp = spectrum(prop.op(), ex.spectrum_count);
                CsvTable t({"index", "eigenvalue", "residual"});
                for (Eigen::Index k = 0; k < sp.values.size(); ++k)
                    t.add_numbers({static_cast<double>(k), sp.values[k], sp.residuals[k]});
                out.write("spectrum.csv", t.str());
                break;
            }
            case Experiment::simulate: {
                const State u0 = ex.initial.sample(mesh);
                const auto traj = prop.propagate(prop.field().reference(), 0.0, ex.t_final, u0, ex.stride);
                std::vector<std::string> header{"t"};
                for (int i = 0; i < n; ++i) header.push_back("node-" + std::to_string(i));
                CsvTable t(header);
                for (std::size_t k = 0; k < traj.times.size(); ++k) {
                    std::vector<double> row{traj.times[k]};
                    row.insert(row.end(), traj.states[k].data(), traj.states[k].data() + n);
                    t.add_numbers(row);
                }
                out.write("trajectory.csv", t.str());
                break;
            }
            case Experiment::bundle: {
                const auto points = hull_sample(prop.field(), ex.hull_samples, stream(e).next_u64(), ex.hull_mode);
                fibers = compute_fibers(prop, points, ex.fiber);
                const auto reference = compute_fiber(prop, prop.field().reference(), ex.fiber);
                CsvTable t({"node", "v", "vstar"});
                for (int i = 0; i < n; ++i)
                    t.add_numbers({static_cast<double>(i), reference.v[i], reference.vstar[i]});
                out.write("fibers.csv", t.str());
                CsvTable s({"sample", "phase-0", "phase-1", "phase-2", "growth", "min_v", "min_vstar", "pullback_T"});
                for (std::size_t k = 0; k < fibers.size(); ++k) {
                    const auto& f = fibers[k];
                    s.add_numbers({static_cast<double>(k), f.b.phase[0], f.b.phase[1], f.b.phase[2], f.growth,
                                   f.v.minCoeff(), f.vstar.minCoeff(), static_cast<double>(f.pullback_T)});
                }
                out.write("fiber_samples.csv", s.str());
                break;
            }
            case Experiment::separation: {
                sep = estimate_separation(prop, fibers, ex.separation, stream(e));
                double contraction = 0.0;
                for (const auto& f : fibers)
                    contraction = std::max(contraction,
                                           projective_contraction(prop, f.b, ex.contraction_trials, stream(e)));
                CsvTable t({"k", "r_k"});
                for (std::size_t k = 0; k < sep.envelope.size(); ++k)
                    t.add_numbers({static_cast<double>(k), sep.envelope[k]});
                out.write("separation.csv", t.str());
                CsvTable s({"lambda", "mu", "D", "Dprime", "mu_continuous", "K", "L", "N", "residual",
                            "residual_continuous", "samples", "series", "monotone", "contraction"});
                s.add_numbers({sep.lambda, sep.mu, sep.D, sep.Dprime, sep.mu_continuous, sep.K, sep.L, sep.N,
                               sep.residual, sep.residual_continuous, static_cast<double>(sep.samples),
                               static_cast<double>(sep.series_count), sep.monotone ? 1.0 : 0.0, contraction});
                out.write("separation_summary.csv", s.str());
                if (!sep.fit_ok)
                    manifest.warnings.push_back("separation: log-linear fit residual " + format_number(sep.residual)
                                                + " above threshold or lambda outside (0,1)");
                break;
            }
            case Experiment::uniqueness: {
                const auto fiber = compute_fiber(prop, prop.field().reference(), ex.fiber);
                for (int p = 0; p < ex.seed_pairs; ++p) {
                    const State sa = detail::random_seed_state(n, stream(e));
                    const State sb = detail::random_seed_state(n, stream(e));
                    const auto rep = uniqueness_test(prop, fiber, sa, sb, ex.t_back, ex.t_fwd);
                    CsvTable t({"T_back", "osc_t0", "osc_tfwd", "kappa_estimate"});
                    for (const auto& r : rep.rows) t.add_numbers({r.T_back, r.osc_t0, r.osc_tfwd, r.kappa});
                    out.write(p == 0 ? "uniqueness.csv" : "uniqueness_" + std::to_string(p) + ".csv", t.str());
                    if (rep.rows.size() >= 2 && !rep.decreasing)
                        throw NumericalError("uniqueness: oscillation does not decay along the T_back ladder "
                                             "(broken positivity or misaligned hull phases)");
                }
                break;
            }
            case Experiment::membership: {
                const State seed = detail::random_seed_state(n, stream(e));
                const auto b = prop.field().reference();
                const auto gsol = approximate_global_positive(prop, b, ex.membership_t_back, seed, ex.membership_t_fwd);
                const auto along = orbit_fibers(prop, b, gsol.times, ex.fiber);
                CsvTable t({"t", "defect"});
                for (const auto& r : bundle_membership_test(prop, gsol, along)) t.add_numbers({r.t, r.defect});
                out.write("membership.csv", t.str());
                break;
            }
            }
        }
    } catch (const ConfigError& err) {
        manifest.status = "config-error";
        manifest.diagnostic = err.what();
        manifest.exit_code = exit_config;
    } catch (const NumericalError& err) {
        manifest.status = "numerical-failure";
        manifest.diagnostic = err.what();
        manifest.exit_code = exit_numerical;
    } catch (const std::exception& err) {
        manifest.status = "error";
        manifest.diagnostic = err.what();
        manifest.exit_code = exit_io;
    }
    manifest.finished = utc_timestamp();
    out.write_manifest();
    return manifest;
}

} // namespace floquet
