#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "floquet/config.hpp"
#include "floquet/report.hpp"
#include "floquet/toml_subset.hpp"

using namespace floquet;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"x(
[mesh]
extent = [1.0]
counts = [21]
)x";

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("floquet_test_" + name);
    fs::remove_all(dir);
    return dir;
}

bool has_issue(const ConfigValidationError& e, const std::string& path) {
    return std::any_of(e.issues().begin(), e.issues().end(),
                       [&](const std::string& s) { return s.rfind(path + ":", 0) == 0; });
}

std::vector<std::string> issues_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigValidationError& e) {
        return e.issues();
    }
    return {};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FLOQUET_SEP_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Toml, ScalarsTablesAndArrays) {
    const auto v = toml::parse(R"x(
# comment
title = "a \"quoted\" string"
lit = 'C:\path'
[a.b]
x = 1_000
y = -2.5e-3
flag = true
list = [
  1, 2.0,   # trailing comment
  [3, 4],
]
c.d = "dotted"
)x");
    EXPECT_EQ(v["title"], "a \"quoted\" string");
    EXPECT_EQ(v["lit"], "C:\\path");
    EXPECT_EQ(v["a"]["b"]["x"], 1000);
    EXPECT_DOUBLE_EQ(v["a"]["b"]["y"].get<double>(), -2.5e-3);
    EXPECT_EQ(v["a"]["b"]["flag"], true);
    EXPECT_EQ(v["a"]["b"]["list"].size(), 3u);
    EXPECT_EQ(v["a"]["b"]["list"][2][1], 4);
    EXPECT_EQ(v["a"]["b"]["c"]["d"], "dotted");
}

TEST(Toml, ErrorsCarryLineNumbers) {
    try {
        toml::parse("a = 1\nb = \n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(toml::parse("a = 1\na = 2\n"), ConfigError);
    EXPECT_THROW(toml::parse("[t]\n[t]\n"), ConfigError);
    EXPECT_THROW(toml::parse("s = \"open\n"), ConfigError);
    EXPECT_THROW(toml::parse("x = 12abc\n"), ConfigError);
    EXPECT_THROW(toml::parse("x = 1 2\n"), ConfigError);
}

TEST(Config, MinimalNeumannGetsDefaults) {
    const auto cfg = parse_config(kMinimal);
    EXPECT_EQ(cfg.propagation.dt, 1e-3);
    EXPECT_EQ(cfg.propagation.scheme, Scheme::strang_implicit);
    EXPECT_EQ(cfg.mesh.dimension, 1);
    ASSERT_EQ(cfg.op.c.size(), 2u);
    EXPECT_EQ(cfg.op.c[0], 0.0);
    EXPECT_EQ(cfg.coefficient.kind, CoefficientKind::constant);
    EXPECT_EQ(cfg.echo["propagation"]["dt"], 1e-3);
    EXPECT_EQ(cfg.echo["propagation"]["scheme"], "strang");
    EXPECT_NO_THROW(build_propagator(cfg));
}

TEST(Config, NamesTheOffendingKeys) {
    auto issues = issues_of("[mesh]\nextent = [1.0]\ncounts = [2]\n");
    ASSERT_FALSE(issues.empty());
    EXPECT_EQ(issues.front().rfind("mesh.counts:", 0), 0u) << issues.front();

    try {
        parse_config(std::string(kMinimal) + "[operator]\nc = [-1.0, 0.0]\n");
        FAIL();
    } catch (const ConfigValidationError& e) {
        EXPECT_TRUE(has_issue(e, "operator.c")) << e.what();
    }
}

TEST(Config, CollectsEveryIssue) {
    try {
        parse_config(R"x(
[mesh]
extnt = [1.0]
counts = [21]
[operator]
c = [0.0, -1.0]
[propagation]
dt = 0.3
scheme = "euler"
[experiment]
run = ["spectrum", "everything"]
[typo]
)x");
        FAIL();
    } catch (const ConfigValidationError& e) {
        for (const char* path : {"mesh.extnt", "mesh.extent", "operator.c", "propagation.dt", "propagation.scheme",
                                 "experiment.run", "typo"})
            EXPECT_TRUE(has_issue(e, path)) << path << "\n" << e.what();
    }
}

TEST(Config, CoefficientBlockMustBeConsistent) {
    const std::string base(kMinimal);
    EXPECT_FALSE(issues_of(base + "[coefficient]\nkind = \"periodic\"\n").empty());
    EXPECT_FALSE(issues_of(base + "[coefficient]\nkind = \"periodic\"\nprofiles = [\"cos-kx(1, 1)\"]\n"
                                  "frequencies = [1.0, 2.0]\n")
                     .empty());
    EXPECT_TRUE(issues_of(base + "[coefficient]\nkind = \"periodic\"\nprofiles = [\"cos-kx(1, 1)\"]\n"
                                 "frequencies = [1.0]\n")
                    .empty());
}

TEST(Report, NumberFormatting) {
    EXPECT_EQ(format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(-1.0 / 3.0), "-0.33333333333333331");
    EXPECT_EQ(format_number(6.02214076e23), "6.0221407599999999e+23");
    CsvTable t({"name", "value"});
    t.add_row({"a,b", "say \"hi\""});
    t.add_numbers({1.5, 2.0});
    EXPECT_EQ(t.str(), "name,value\r\n\"a,b\",\"say \"\"hi\"\"\"\r\n1.5,2\r\n");
}

TEST(Report, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, DependencyClosure) {
    const auto plan = dependency_closure({Experiment::uniqueness});
    const std::vector<Experiment> want{Experiment::bundle, Experiment::separation, Experiment::uniqueness};
    EXPECT_EQ(plan, want);
    EXPECT_EQ(dependency_closure({Experiment::spectrum}), std::vector<Experiment>{Experiment::spectrum});
}

TEST(Report, SpectrumOnlyWritesOneCsvAndManifest) {
    auto cfg = parse_config(kMinimal);
    cfg.output_dir = scratch_dir("spectrum").string();
    const auto m = run_scenario(cfg);
    EXPECT_EQ(m.exit_code, exit_ok);
    ASSERT_EQ(m.outputs.size(), 1u);
    EXPECT_EQ(m.outputs[0].name, "spectrum.csv");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(cfg.output_dir)) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    EXPECT_EQ(files, (std::vector<std::string>{"manifest.json", "spectrum.csv"}));
    EXPECT_EQ(sha256_hex(slurp(fs::path(cfg.output_dir) / "spectrum.csv")), m.outputs[0].sha256);
    const auto manifest = toml::Value::parse(slurp(fs::path(cfg.output_dir) / "manifest.json"));
    EXPECT_EQ(manifest["status"], "ok");
    EXPECT_EQ(manifest["config"]["propagation"]["scheme"], "strang");
}

TEST(Report, RerunsAreByteIdentical) {
    auto cfg = parse_config(std::string(kMinimal) + R"x(
[coefficient]
kind = "periodic"
profiles = ["cos-kx(1, 1)"]
frequencies = [1.0]
[propagation]
dt = 0.02
[operator]
a = "const(0.3)"
[experiment]
run = ["uniqueness", "membership", "simulate"]
seed = 42
hull_samples = 3
k_max = 5
t_back = [1, 2, 4]
membership_t_back = 2
membership_t_fwd = 1
contraction_trials = 4
)x");
    cfg.output_dir = scratch_dir("rerun_a").string();
    const auto a = run_scenario(cfg);
    cfg.output_dir = scratch_dir("rerun_b").string();
    const auto b = run_scenario(cfg);
    ASSERT_EQ(a.exit_code, exit_ok) << a.diagnostic;
    ASSERT_EQ(a.outputs.size(), b.outputs.size());
    EXPECT_EQ(a.experiments, (std::vector<std::string>{"simulate", "bundle", "separation", "uniqueness",
                                                      "membership"}));
    for (std::size_t i = 0; i < a.outputs.size(); ++i) {
        EXPECT_EQ(a.outputs[i].name, b.outputs[i].name);
        EXPECT_EQ(a.outputs[i].sha256, b.outputs[i].sha256) << a.outputs[i].name;
    }
}

TEST(Report, NumericalFailureIsRecorded) {
    auto cfg = parse_config(std::string(kMinimal) + R"x(
[coefficient]
kind = "periodic"
profiles = ["cos-kx(1, 1)"]
frequencies = [1.0]
[operator]
a = "const(0.001)"
[propagation]
dt = 0.05
[experiment]
run = ["bundle"]
fiber_max_t = 2
fiber_tol = 1e-14
)x");
    cfg.output_dir = scratch_dir("failure").string();
    const auto m = run_scenario(cfg);
    EXPECT_EQ(m.exit_code, exit_numerical);
    EXPECT_EQ(m.status, "numerical-failure");
    EXPECT_FALSE(m.diagnostic.empty());
    const auto manifest = toml::Value::parse(slurp(fs::path(cfg.output_dir) / "manifest.json"));
    EXPECT_EQ(manifest["exit_code"], exit_numerical);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch_dir("cli");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "good.toml") << kMinimal;
        std::ofstream(dir / "bad.toml") << "[mesh]\nextent = [1.0]\ncounts = [2]\n";
    }
    EXPECT_EQ(run_cli("spectrum --config " + (dir / "good.toml").string() + " --out " + (dir / "out").string()),
              exit_ok);
    EXPECT_TRUE(fs::exists(dir / "out" / "spectrum.csv"));
    EXPECT_EQ(run_cli("spectrum --config " + (dir / "bad.toml").string() + " --out " + (dir / "o2").string()),
              exit_config);
    EXPECT_EQ(run_cli("spectrum --config " + (dir / "missing.toml").string()), exit_config);
    EXPECT_EQ(run_cli("frobnicate --config " + (dir / "good.toml").string()), exit_config);
    EXPECT_EQ(run_cli("spectrum --config " + (dir / "good.toml").string() + " --out " + (dir / "o3").string()
                      + " --seed 18446744073709551615"),
              exit_ok);
    const auto manifest = toml::Value::parse(slurp(dir / "o3" / "manifest.json"));
    EXPECT_EQ(manifest["seed"].get<std::uint64_t>(), 18446744073709551615ull);
}
