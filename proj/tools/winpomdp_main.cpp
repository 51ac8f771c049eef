#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "winpomdp/bench.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Windowed latent-variable RL toolkit for tabular POMDPs"};
    app.require_subcommand(1);

    // run
    std::string config_path;
    std::string run_out;
    std::uint64_t seed_override = 0;
    bool have_seed_override = false;
    auto* run = app.add_subcommand("run", "Execute the experiment described by a config file");
    run->add_option("--config", config_path, "Path to a winpomdp_config v1 file")->required();
    run->add_option("--out", run_out, "Output directory (overrides config and WINPOMDP_OUT)");
    run->add_option("--seed-override", seed_override, "Replace the config's seed list with one seed")
        ->each([&](const std::string&) { have_seed_override = true; });

    // verify
    winpomdp::bench::FixtureSpec fixture;
    int window_len = 1;
    std::vector<std::string> policies;
    bool strict = false;
    std::string verify_out;
    double threshold = 1e-6;
    auto* verify = app.add_subcommand(
        "verify", "Report decodability gaps and linear-representability residuals");
    verify->add_option("--fixture", fixture.name, "FLIP | LOCK | GRIDMASK | file")->required();
    verify->add_option("--eta", fixture.eta, "FLIP emission accuracy");
    verify->add_option("--code-length", fixture.code_length, "LOCK code length");
    verify->add_option("--lock-actions", fixture.lock_actions, "LOCK action count");
    verify->add_option("--grid-size", fixture.grid_size, "GRIDMASK ring size");
    verify->add_option("--horizon", fixture.horizon, "Horizon override (0 = fixture default)");
    verify->add_option("--file", fixture.path, "Fixture file path (with --fixture file)");
    verify->add_option("--window", window_len, "Window length L")->required();
    verify->add_option("--policy", policies, "Policy spec: uniform, const:<a>, random:<seed> (repeatable)");
    verify->add_flag("--strict", strict, "Fail on any positive decodability gap");
    verify->add_option("--out", verify_out, "Directory for residual CSV reports");
    verify->add_option("--threshold", threshold, "Residual failure threshold");

    // plot-data
    std::string metrics_path;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot-data", "Emit per-variant learning-curve data from a metrics CSV");
    plot->add_option("--metrics", metrics_path, "Path to metrics.csv")->required();
    plot->add_option("--out", plot_out, "Output directory for curve files");

    auto* fixtures = app.add_subcommand("fixtures", "List the built-in fixtures");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            winpomdp::bench::CliOverrides overrides;
            if (!run_out.empty()) overrides.outdir = run_out;
            if (have_seed_override) overrides.seed_override = seed_override;
            return winpomdp::bench::cmd_run(config_path, overrides);
        }
        if (verify->parsed()) {
            if (policies.empty()) policies = {"uniform"};
            std::optional<std::string> out;
            if (!verify_out.empty()) out = verify_out;
            return winpomdp::bench::cmd_verify(fixture, window_len, policies, strict, out, threshold);
        }
        if (plot->parsed()) {
            std::optional<std::string> out;
            if (!plot_out.empty()) out = plot_out;
            return winpomdp::bench::cmd_plot_data(metrics_path, out);
        }
        if (fixtures->parsed()) return winpomdp::bench::cmd_fixtures();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
