#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "winpomdp/explore.hpp"
#include "winpomdp/latent.hpp"
#include "winpomdp/pomdp.hpp"
#include "winpomdp/value.hpp"

namespace winpomdp {

struct AgentConfig {
    int window_len = 1;
    int n_latent = 0;  // 0 uses the fixture's state count
    int episodes = 1;
    FitConfig fit;
    bool bonus_enabled = true;
    BonusConfig bonus;          // cap / truncation / mode; alpha and lambda come from the schedule
    double schedule_alpha = 1.0;
    double schedule_lambda = 1.0;
    double planner_ridge = 1e-6;
    bool model_tv_diag = false;  // per-episode exact model error diagnostic (needs the oracle)
    std::uint64_t seed = 0;

    void validate(const TabularPomdp& pomdp) const;
};

struct BonusStats {
    double mean = 0.0;
    double max = 0.0;
};

struct EpisodeLog {
    int episode = 0;
    double ret = 0.0;            // exact value of the planned policy in the true environment
    double planning_value = 0.0; // planner value under the learned model with bonus
    std::optional<double> model_tv;
    std::vector<BonusStats> bonus_by_step;
};

// Per-step bonus (or penalty) values over the planner's window enumeration.
struct BonusTable {
    std::vector<std::map<Window, std::vector<double>>> by_step;

    double at(int h, const Window& x, int a) const;
    BonusStats stats(int h) const;
};

// One data-collection pass at step h per Algorithm-style bookkeeping: the
// policy reaches x_h, then actions are uniformly random. A full L-step
// rollout lands its first transition in D and the following ones in the
// D' buffers; past h + L > H the rollout shortens to H - h steps whose
// records all land in D'.
struct CollectResult {
    std::optional<TransitionRecord> d_record;                 // for D_h
    std::vector<std::pair<int, TransitionRecord>> d_prime;    // (step, record) for D'_step
};

CollectResult collect_rollout(const TabularPomdp& pomdp, const WindowPolicy& policy, int h,
                              int window_len, std::uint64_t seed);

enum class PenaltyMode {
    None,     // plain reward
    Add,      // reward + bonus
    Subtract  // reward - penalty, unfloored so unexplored branches stay unattractive
};

struct PlanResult {
    WindowPolicy policy;
    double value = 0.0;
};

// Exact finite-horizon backward induction inside the learned model over all
// padded windows, with greedy tie-breaking toward the smallest action index.
// The value averages the initial windows under init_obs_dist.
PlanResult plan(const LatentModel& model, const TabularPomdp& pomdp, const BonusTable* bonuses,
                PenaltyMode mode, int window_len, const std::vector<double>& init_obs_dist);

struct OnlineResult {
    std::vector<WindowPolicy> policies;  // pi_1 .. pi_K
    std::vector<EpisodeLog> logs;
    LatentModel final_model;
    // Collected data, exposed for dataset bookkeeping checks and reuse.
    std::vector<TransitionDataset> d;
    std::vector<TransitionDataset> d_prime;
};

// Online loop: collect under the latest policy, refit the latent model,
// build ellipsoid bonuses on the episode schedule, and replan greedily.
// Deterministic given (pomdp, cfg).
OnlineResult run_online(const TabularPomdp& pomdp, const AgentConfig& cfg);

struct OfflineDataset {
    std::vector<TransitionDataset> steps;
    std::vector<double> init_obs_freq;
    int episodes = 0;
};

// Behavior-policy transitions (x_h, a_h, o_{h+1}) for every step, one record
// per step per episode.
OfflineDataset collect_offline_dataset(const TabularPomdp& pomdp, const WindowPolicy& behavior,
                                       int n_episodes, int window_len, std::uint64_t seed);

struct OfflineResult {
    WindowPolicy policy;
    double pessimistic_value = 0.0;
    LatentModel model;
};

// Offline loop: one fit, penalties from the dataset covariance, planning on
// the penalized (floored) reward.
OfflineResult run_offline(const TabularPomdp& pomdp, const OfflineDataset& data,
                          const AgentConfig& cfg);

struct EvalResult {
    double mean = 0.0;
    double std_error = 0.0;
};

// Seeded Monte-Carlo return estimate in the true environment.
EvalResult evaluate_policy(const TabularPomdp& pomdp, const WindowPolicy& policy, int n_episodes,
                           std::uint64_t seed);

// Exact policy value by forward dynamic programming over the joint
// (state, window) distribution; exact for any window policy.
double exact_policy_value(const TabularPomdp& pomdp, const WindowPolicy& policy, int window_len);

}  // namespace winpomdp
