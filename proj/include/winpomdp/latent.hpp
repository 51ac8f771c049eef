#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "winpomdp/oracle.hpp"
#include "winpomdp/pomdp.hpp"

namespace winpomdp {

struct FitConfig {
    int max_iters = 200;
    double tol = 1e-7;
    double floor_prob = 1e-6;
    std::uint64_t seed = 0;
    int n_latent = 0;  // 0 keeps the caller's choice mandatory at fit time
    int n_obs = 0;     // 0 infers the observation space from the data
};

struct TransitionRecord {
    Window window;
    int action = 0;
    int next_obs = 0;
};

// Transitions (x_h, a_h, o_{h+1}) collected at one step.
struct TransitionDataset {
    int step = 0;
    std::vector<TransitionRecord> records;
};

// Per-step factorized observation model: encode rows p(z | x, a) keyed by
// (window, action), and a shared decode table p(o' | z).
class LatentModel {
public:
    struct StepModel {
        std::map<std::pair<Window, int>, int> row_index;
        std::vector<std::vector<double>> encode_rows;  // [row][m]
        std::vector<std::vector<double>> decode;       // [m][nObs]
    };

    LatentModel() = default;
    LatentModel(int n_latent, int n_obs, int window_len, int n_steps);

    int n_latent() const { return n_latent_; }
    int n_obs() const { return n_obs_; }
    int window_len() const { return window_len_; }
    int n_steps() const { return static_cast<int>(steps_.size()); }

    // Encode row for (x, a); unseen pairs fall back to the uniform
    // distribution over latents, reported through `seen`.
    std::vector<double> encode(int h, const Window& x, int a, bool* seen = nullptr) const;
    const std::vector<double>& decode_row(int h, int z) const;

    void set_encode(int h, const Window& x, int a, std::vector<double> probs);
    void set_decode(int h, int z, std::vector<double> probs);
    const StepModel& step(int h) const { return steps_.at(static_cast<std::size_t>(h)); }

    void validate() const;

    std::string to_text() const;
    static LatentModel from_text(const std::string& text, const std::string& name = "<string>");
    void save(const std::filesystem::path& path) const;
    static LatentModel load(const std::filesystem::path& path);

private:
    int n_latent_ = 0;
    int n_obs_ = 0;
    int window_len_ = 1;
    std::vector<StepModel> steps_;
};

// Variational rows q(z | x, a, o') keyed per step by (window, action, next obs).
struct VariationalPosterior {
    std::map<std::tuple<int, Window, int, int>, std::vector<double>> rows;

    const std::vector<double>& row(int h, const Window& x, int a, int o_next) const;
    void set_row(int h, const Window& x, int a, int o_next, std::vector<double> probs);
};

// Exact marginalization sum_z p(z|x,a) p(o'|z).
std::vector<double> predicted_obs_prob(const LatentModel& model, int h, const Window& x, int a);

// Bayes posterior over latents given the next observation.
std::vector<double> exact_posterior(const LatentModel& model, int h, const Window& x, int a,
                                    int o_next);

// E_q[log p(o'|z)] - KL(q || p(z|x,a)); never exceeds the log marginal.
double elbo(const LatentModel& model, std::span<const double> q_row, int h, const Window& x, int a,
            int o_next);
double elbo(const LatentModel& model, const VariationalPosterior& q, int h,
            const TransitionRecord& record);

struct FitResult {
    LatentModel model;
    // Data log-likelihood measured at the start of each EM iteration, per step.
    std::vector<std::vector<double>> ll_trace;
    std::vector<int> iterations;
};

// Maximum-likelihood fit of the per-step mixtures by exact EM: E-step is the
// exact posterior per record, M-step the posterior-weighted frequency
// re-estimation with rows floored at floor_prob. Deterministic given the
// config seed.
FitResult fit_mle_detailed(const std::vector<TransitionDataset>& datasets, int n_latent,
                           const FitConfig& config);
LatentModel fit_mle(const std::vector<TransitionDataset>& datasets, int n_latent,
                    const FitConfig& config);

// Best-possible distribution with all entries >= floor: maximizes
// sum_i weight_i log p_i subject to the floor, via water-filling.
std::vector<double> floored_distribution(std::span<const double> weights, double floor_prob);

// Ground-truth factorization of a fixture through the exact window beliefs,
// with the latent identified with the next state: encode = belief pushed
// through the transitions, decode = emission rows.
LatentModel exact_latent_model(const TabularPomdp& pomdp, int window_len,
                               std::int64_t node_budget = kDefaultNodeBudget);

struct TvErrorReport {
    double weighted_avg_sq = 0.0;                    // weighted average squared L1
    std::map<std::pair<Window, int>, double> l1_by_pair;
};

// Compares predicted_obs_prob against the exact observation dynamics through
// the window-belief oracle under the given (window, action) weighting.
TvErrorReport model_tv_error_report(const LatentModel& model, const TabularPomdp& pomdp,
                                    int window_len, int h,
                                    const std::map<std::pair<Window, int>, double>& weighting,
                                    std::int64_t node_budget = kDefaultNodeBudget);
double model_tv_error(const LatentModel& model, const TabularPomdp& pomdp, int window_len, int h,
                      const std::map<std::pair<Window, int>, double>& weighting,
                      std::int64_t node_budget = kDefaultNodeBudget);

// Reach-probability weighting over (window, action) pairs at step h under
// uniform actions; the default weighting for model error reports.
std::map<std::pair<Window, int>, double> uniform_reach_weighting(
    const TabularPomdp& pomdp, int window_len, int h,
    std::int64_t node_budget = kDefaultNodeBudget);

}  // namespace winpomdp
