#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "floquet/floquet.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw floquet::ConfigError("cannot read config file '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Principal Floquet bundle and exponential separation lab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(floquet::kToolVersion));

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;

    std::vector<std::string> names(floquet::kExperimentNames.begin(), floquet::kExperimentNames.end());
    names.emplace_back("all");
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name, name == "all" ? "run every experiment" : "run the " + name + " experiment");
        sub->add_option("--config", config_path, "scenario file (TOML subset)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "random seed (overrides the config)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : floquet::exit_config;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    floquet::ScenarioConfig cfg;
    try {
        cfg = floquet::parse_config(read_file(config_path));
    } catch (const floquet::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return floquet::exit_config;
    }

    if (command == "all") {
        cfg.experiment.run.clear();
        for (std::size_t k = 0; k < floquet::kExperimentNames.size(); ++k)
            cfg.experiment.run.push_back(static_cast<floquet::Experiment>(k));
    } else {
        const auto it = std::find(floquet::kExperimentNames.begin(), floquet::kExperimentNames.end(), command);
        cfg.experiment.run = {static_cast<floquet::Experiment>(it - floquet::kExperimentNames.begin())};
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_given) {
        cfg.experiment.seed = seed;
        cfg.echo["experiment"]["seed"] = seed;
    }
    cfg.echo["experiment"]["run"] = floquet::toml::Value::array();
    for (auto e : cfg.experiment.run) cfg.echo["experiment"]["run"].push_back(std::string(floquet::to_string(e)));
    cfg.echo["output_dir"] = cfg.output_dir;

    const auto manifest = floquet::run_scenario(cfg);
    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << '\n';
    if (manifest.exit_code != floquet::exit_ok) {
        std::cerr << manifest.status << ": " << manifest.diagnostic << '\n';
    } else {
        for (const auto& f : manifest.outputs) std::cout << cfg.output_dir << '/' << f.name << "  " << f.sha256 << '\n';
    }
    return manifest.exit_code;
}
