#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "winpomdp/errors.hpp"
#include "winpomdp/rng.hpp"

namespace winpomdp {

inline constexpr double kDistributionTol = 1e-9;
inline constexpr double kNormalizerFloor = 1e-12;

// Finite POMDP with stationary dynamics. Rewards depend on the current
// observation and the action taken at it; they lie in [0, 1].
struct TabularPomdp {
    int n_states = 0;
    int n_actions = 0;
    int n_obs = 0;
    int horizon = 0;
    std::vector<double> rho0;    // [S]
    std::vector<double> trans;   // [S*A, S] row-major, row (s, a)
    std::vector<double> emit;    // [S, O]
    std::vector<double> reward;  // [O, A]

    double trans_at(int s, int a, int s_next) const {
        return trans[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next];
    }
    std::span<const double> trans_row(int s, int a) const {
        return {trans.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }
    double emit_at(int s, int o) const { return emit[static_cast<std::size_t>(s) * n_obs + o]; }
    std::span<const double> emit_row(int s) const {
        return {emit.data() + static_cast<std::size_t>(s) * n_obs, static_cast<std::size_t>(n_obs)};
    }
    double reward_at(int o, int a) const { return reward[static_cast<std::size_t>(o) * n_actions + a]; }

    // Throws InvalidArgument unless all rows are distributions within 1e-9
    // and rewards lie in [0, 1].
    void validate() const;
};

// Built-in fixtures.
//
// flip: two states, actions {stay, flip}, symbol-flip emission noise 1-eta,
// reward 1 on observing symbol 1.
TabularPomdp flip_pomdp(double eta, int horizon = 2);
// lock: sequence lock over `code_length` dial positions whose observation
// lags the position by window_len-1 steps; one action per position advances
// the dial, any other falls into an absorbing dead position, and the full
// code reaches an absorbing open position that pays 1 per step once observed.
TabularPomdp lock_pomdp(int window_len, int code_length, int horizon = -1, int n_actions = 4);
// gridmask: ring of `n_pos` cells with hidden binary velocity; only the
// position is observed, reward 1 on observing the last cell.
TabularPomdp gridmask_pomdp(int n_pos = 4, int horizon = 6);

TabularPomdp load_pomdp(const std::filesystem::path& path);
void save_pomdp(const TabularPomdp& pomdp, const std::filesystem::path& path);
std::string pomdp_to_text(const TabularPomdp& pomdp);
TabularPomdp pomdp_from_text(const std::string& text, const std::string& name = "<string>");

// Posterior over latent states given the action-observation history so far.
struct BeliefVector {
    std::vector<double> probs;

    void validate() const;
};

BeliefVector belief_init(const TabularPomdp& pomdp, int o0);
BeliefVector belief_update(const TabularPomdp& pomdp, const BeliefVector& b, int a, int o_next);
// Exact one-step predicted observation distribution.
std::vector<double> obs_prob(const TabularPomdp& pomdp, const BeliefVector& b, int a);
// Marginal distribution of the first observation under rho0.
std::vector<double> initial_obs_marginal(const TabularPomdp& pomdp);

// Sentinel for observation/action slots before the episode start.
inline constexpr int kPad = -1;

// The last L observations interleaved with the last L-1 actions. Slots
// before the episode start hold kPad, always as a contiguous prefix.
struct Window {
    std::vector<int> obs;   // length L
    std::vector<int> acts;  // length L-1

    int window_len() const { return static_cast<int>(obs.size()); }
    int current_obs() const { return obs.back(); }
    int pad_count() const;
    void validate() const;

    auto operator<=>(const Window&) const = default;
};

Window initial_window(int window_len, int o0);
// Drops the oldest (o, a) pair and appends (a, o_next).
Window window_shift(const Window& x, int a, int o_next);

inline int pad_count_for_step(int window_len, int h) {
    return h < window_len - 1 ? window_len - 1 - h : 0;
}

// All structurally valid windows with exactly `pad` sentinel slots.
std::vector<Window> enumerate_windows(int window_len, int n_obs, int n_actions, int pad);

struct Trajectory {
    std::vector<int> observations;   // o_0 .. o_H
    std::vector<int> actions;        // a_0 .. a_{H-1}
    std::vector<double> rewards;     // r(o_h, a_h), h < H
    std::vector<int> latent_states;  // s_0 .. s_H; simulator bookkeeping, hidden from agents

    double total_reward() const;
};

// Step-indexed policy over padded windows.
class WindowPolicy {
public:
    enum class Kind { Uniform, Constant, Table };

    WindowPolicy() = default;
    static WindowPolicy uniform(int n_actions, int horizon);
    static WindowPolicy constant(int action, int n_actions, int horizon);
    // Deterministic table policy with a seeded random action per window,
    // covering all valid windows per step.
    static WindowPolicy random_deterministic(const TabularPomdp& pomdp, int window_len,
                                             std::uint64_t seed);

    Kind kind() const { return kind_; }
    int n_actions() const { return n_actions_; }
    int horizon() const { return horizon_; }
    int window_len() const { return window_len_; }
    int constant_action() const { return constant_action_; }

    std::vector<double> row(int h, const Window& x) const;
    void set_row(int h, const Window& x, std::vector<double> probs);
    int sample(int h, const Window& x, Rng& rng) const;
    // Highest-probability action, ties toward the smallest index.
    int greedy(int h, const Window& x) const;

    const std::map<Window, std::vector<double>>& table_rows(int h) const { return table_.at(h); }

    static WindowPolicy make_table(int n_actions, int horizon, int window_len);

    std::string to_text() const;
    static WindowPolicy from_text(const std::string& text, const std::string& name = "<string>");
    void save(const std::filesystem::path& path) const;
    static WindowPolicy load(const std::filesystem::path& path);

private:
    Kind kind_ = Kind::Uniform;
    int n_actions_ = 1;
    int horizon_ = 0;
    int window_len_ = 1;
    int constant_action_ = 0;
    std::vector<std::map<Window, std::vector<double>>> table_;
};

// Seeded simulation of one full episode under the policy.
Trajectory sample_episode(const TabularPomdp& pomdp, const WindowPolicy& policy,
                          std::uint64_t rng_seed);

// Distribution sanity helpers shared across modules.
bool is_distribution(std::span<const double> p, double tol = kDistributionTol);
void check_distribution(std::span<const double> p, const std::string& what,
                        double tol = kDistributionTol);
double tv_distance(std::span<const double> p, std::span<const double> q);

}  // namespace winpomdp
