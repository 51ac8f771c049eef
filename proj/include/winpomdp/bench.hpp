#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "winpomdp/agent.hpp"

namespace winpomdp::bench {

struct FixtureSpec {
    std::string name = "FLIP";  // FLIP | LOCK | GRIDMASK | file
    double eta = 1.0;
    int code_length = 3;
    int lock_actions = 4;
    int grid_size = 4;
    int horizon = 0;  // 0 = fixture default
    std::string path;

    TabularPomdp build(int window_len) const;
    std::string describe() const;
};

enum class Variant { BonusOn, BonusOff, UniformBaseline };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ExperimentConfig {
    FixtureSpec fixture;
    int window_len = 1;
    int n_latent = 0;
    int episodes = 1;
    std::vector<std::uint64_t> seeds = {1};
    std::vector<Variant> variants = {Variant::BonusOn};
    std::string outdir;
    FitConfig fit;
    double schedule_alpha = 1.0;
    double schedule_lambda = 1.0;
    double bonus_cap = 2.0;
    bool bonus_truncate = true;
    double planner_ridge = 1e-6;
    bool model_tv_diag = false;
    bool timings = false;

    static ExperimentConfig load(const std::filesystem::path& path);
    static ExperimentConfig from_text(const std::string& text, const std::string& name = "<config>");
    std::string to_text() const;
    void validate() const;
    AgentConfig agent_config(std::uint64_t seed, bool bonus_enabled) const;
};

struct MetricsRow {
    std::string run_id;  // "<variant>:<seed>"
    int episode = 0;
    double ret = 0.0;
    double planning_value = 0.0;
    std::optional<double> model_tv;
    double mean_bonus = 0.0;
    long long wall_clock_ms = 0;
};

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> metrics_from_csv(const std::string& text, const std::string& name = "<csv>");

// Builds a named policy for the verify command: "uniform", "const:<a>",
// or "random:<seed>".
WindowPolicy make_named_policy(const std::string& spec, const TabularPomdp& pomdp, int window_len);

struct CliOverrides {
    std::optional<std::string> outdir;
    std::optional<std::uint64_t> seed_override;
};

// Resolution order for the output root: explicit flag, config value,
// WINPOMDP_OUT, then ./winpomdp_out.
std::filesystem::path resolve_outdir(const std::optional<std::string>& flag_value,
                                     const std::string& config_value);

int cmd_run(const std::filesystem::path& config_path, const CliOverrides& overrides);
int cmd_verify(const FixtureSpec& fixture, int window_len,
               const std::vector<std::string>& policy_specs, bool strict,
               const std::optional<std::string>& outdir, double residual_threshold = 1e-6);
int cmd_plot_data(const std::filesystem::path& metrics_path,
                  const std::optional<std::string>& outdir);
int cmd_fixtures();

}  // namespace winpomdp::bench
