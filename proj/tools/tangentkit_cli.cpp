#include "tangentkit/errors.hpp"
#include "tangentkit/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace h = tk::harness;

namespace {

int validate(const std::string& path) {
    const auto report = h::validate_config(path);
    if (!report.valid()) {
        std::cerr << report.describe();
        return h::kExitConfig;
    }
    std::cout << path << ": valid (" << h::to_string(report.config.experiment) << ")\n";
    return h::kExitOk;
}

int run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
        std::optional<std::size_t> threads) {
    auto report = h::validate_config(path);
    if (!report.valid()) {
        std::cerr << report.describe();
        return h::kExitConfig;
    }
    auto& config = report.config;
    if (seed) config.seed = *seed;
    if (out) config.output = *out;
    if (threads) config.threads = *threads;
    const auto result = h::run(config);
    for (const auto& dir : result.directories) std::cout << dir.string() << "\n";
    return h::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tangent feature experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--out", out, "Override the output directory");
    app.add_option("--threads", threads, "Replica workers")->check(CLI::PositiveNumber);

    std::string run_path;
    auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
    run_cmd->add_option("config", run_path, "Config file")->required();

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Check a config file without running it");
    validate_cmd->add_option("config", validate_path, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? h::kExitOk : h::kExitConfig;
    }

    try {
        if (*validate_cmd) return validate(validate_path);
        return run(run_path, seed, out, threads);
    } catch (const tk::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return h::kExitConfig;
    } catch (const tk::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return h::kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return h::kExitRuntime;
    }
}
