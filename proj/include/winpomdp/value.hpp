#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "winpomdp/latent.hpp"
#include "winpomdp/oracle.hpp"
#include "winpomdp/pomdp.hpp"

namespace winpomdp {

// Linear coefficients over the latent space. A weight vector at step h
// represents the continuation value Q_h - r: the agent observes (o_h, a_h),
// so the immediate reward is added outside the inner product.
struct WeightVector {
    int step = 0;
    Eigen::VectorXd weights;

    static WeightVector zeros(int step, int dim) { return {step, Eigen::VectorXd::Zero(dim)}; }
};

// An encode row p(z | x, a) together with where it came from.
struct FeatureVector {
    Eigen::VectorXd values;
    int step = 0;
    Window window;
    int action = 0;
};

FeatureVector make_feature(const LatentModel& model, int h, const Window& x, int a);

// Text serialization for per-step weight vectors, sharing the versioned
// structured-text conventions of fixtures and models.
std::string weights_to_text(const std::vector<WeightVector>& weights);
std::vector<WeightVector> weights_from_text(const std::string& text,
                                            const std::string& name = "<string>");
void save_weights(const std::vector<WeightVector>& weights, const std::filesystem::path& path);
std::vector<WeightVector> load_weights(const std::filesystem::path& path);

// One L-step forward rollout used by the windowed Bellman backup. Near the
// horizon the rollout is truncated at H and carries no end action.
struct LRollout {
    Window start_window;
    std::vector<int> actions;       // a_h .. a_{h+len-1}
    std::vector<int> observations;  // o_{h+1} .. o_{h+len}
    double reward_sum = 0.0;        // sum of r(o_i, a_i) over the rollout steps
    Window end_window;
    std::optional<int> end_action;

    void validate() const;  // end_window must equal the shifted start_window
};

// Inner product <p(.|x,a), w>.
double q_value(const LatentModel& model, const WeightVector& w, const Window& x, int a);
// Monte-Carlo estimate of the same inner product from latent samples.
double q_value_mc(const LatentModel& model, const WeightVector& w, const Window& x, int a,
                  int n_samples, std::uint64_t seed);

// Total value estimate r(o(x), a) + <p(.|x,a), w>; zero weights when w is null.
double q_total(const TabularPomdp& pomdp, const LatentModel& model, const WeightVector* w,
               const Window& x, int a);

// A regression pair produced by the windowed backup. `target` is the sampled
// return estimate for (x_h, a_h); subtracting `first_reward` (= r(o_h, a_h))
// gives the quantity the weight vector fits.
struct TargetPair {
    FeatureVector feature;
    double target = 0.0;
    double first_reward = 0.0;
};

// Builds regression pairs at step h: feature from the rollout's first
// (window, action), target = reward_sum plus the bootstrapped value at the
// end window. Pass w_next = nullptr at h + L >= H.
std::vector<TargetPair> lstep_targets(const std::vector<LRollout>& rollouts,
                                      const LatentModel& model, const TabularPomdp& pomdp, int h,
                                      const WeightVector* w_next);

// Ridge least squares over (feature, value) pairs via the m x m normal
// equations and an SPD solve. ridge = 0 requires a full-rank Gram matrix.
WeightVector lspe_solve(const std::vector<std::pair<FeatureVector, double>>& pairs, double ridge,
                        int step);
// Convenience overload: regresses target - first_reward.
WeightVector lspe_solve(const std::vector<TargetPair>& pairs, double ridge, int step);

// Where L-step rollouts come from: the real environment or the learned model.
class RolloutSource {
public:
    virtual ~RolloutSource() = default;
    virtual int horizon() const = 0;
    virtual int n_actions() const = 0;
    // On-policy rollout of min(L, H-h) steps whose start window is reached by
    // running the policy from the episode start.
    virtual LRollout sample(int h, int window_len, const WindowPolicy& policy, Rng& rng) const = 0;
};

class EnvRolloutSource final : public RolloutSource {
public:
    explicit EnvRolloutSource(const TabularPomdp& pomdp) : pomdp_(pomdp) {}
    int horizon() const override { return pomdp_.horizon; }
    int n_actions() const override { return pomdp_.n_actions; }
    LRollout sample(int h, int window_len, const WindowPolicy& policy, Rng& rng) const override;

private:
    const TabularPomdp& pomdp_;
};

// Rollouts simulated inside a latent observation model.
class ModelRolloutSource final : public RolloutSource {
public:
    ModelRolloutSource(const LatentModel& model, const TabularPomdp& pomdp,
                       std::vector<double> init_obs_dist)
        : model_(model), pomdp_(pomdp), init_obs_(std::move(init_obs_dist)) {}
    int horizon() const override { return pomdp_.horizon; }
    int n_actions() const override { return pomdp_.n_actions; }
    LRollout sample(int h, int window_len, const WindowPolicy& policy, Rng& rng) const override;

private:
    const LatentModel& model_;
    const TabularPomdp& pomdp_;  // reward and horizon only
    std::vector<double> init_obs_;
};

// Backward least-squares policy evaluation: fits one weight vector per step
// from n_rollouts sampled L-step backups, reading the step h + L weights
// (zero past the horizon).
std::vector<WeightVector> policy_evaluate(const RolloutSource& source, const LatentModel& model,
                                          const TabularPomdp& pomdp, const WindowPolicy& policy,
                                          int window_len, int n_rollouts, double ridge,
                                          std::uint64_t seed);

// Policy value implied by the step-0 weights and the exact initial
// observation marginal.
double value_at_init(const TabularPomdp& pomdp, const LatentModel& model,
                     const std::vector<WeightVector>& weights, const WindowPolicy& policy,
                     int window_len);

struct RepresentabilityResult {
    double max_residual = 0.0;
    double mean_residual = 0.0;
    int n_points = 0;
    WeightVector w_fit;
};

// Checks that the exact continuation values Q_h - r are linear in the exact
// features p*(s'|x,a) by brute force: requires the fixture to be empirically
// L-decodable, regresses oracle Q-values on the features, and reports the
// worst absolute residual.
RepresentabilityResult verify_linear_representability(const TabularPomdp& pomdp,
                                                      const WindowPolicy& policy, int window_len,
                                                      int h,
                                                      std::int64_t node_budget = kDefaultNodeBudget);

}  // namespace winpomdp
