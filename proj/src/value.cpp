#include "winpomdp/value.hpp"

#include <algorithm>
#include <cmath>

#include "winpomdp/textio.hpp"

namespace winpomdp {

std::string weights_to_text(const std::vector<WeightVector>& weights) {
    TextWriter w;
    w.keyword("winpomdp_weights");
    w.keyword("v1");
    w.endl();
    w.keyword("count");
    w.value(static_cast<long long>(weights.size()));
    w.endl();
    for (const auto& wv : weights) {
        w.keyword("step");
        w.value(wv.step);
        w.keyword("dim");
        w.value(static_cast<long long>(wv.weights.size()));
        for (Eigen::Index i = 0; i < wv.weights.size(); ++i) w.value(wv.weights[i]);
        w.endl();
    }
    return w.str();
}

std::vector<WeightVector> weights_from_text(const std::string& text, const std::string& name) {
    TextReader r = TextReader::from_string(text, name);
    r.read_header("winpomdp_weights");
    r.expect("count");
    const long long count = r.next_int();
    std::vector<WeightVector> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
        r.expect("step");
        WeightVector wv;
        wv.step = static_cast<int>(r.next_int());
        r.expect("dim");
        const long long dim = r.next_int();
        wv.weights.resize(dim);
        for (long long j = 0; j < dim; ++j) wv.weights[j] = r.next_double();
        out.push_back(std::move(wv));
    }
    return out;
}

void save_weights(const std::vector<WeightVector>& weights, const std::filesystem::path& path) {
    write_file(path, weights_to_text(weights));
}

std::vector<WeightVector> load_weights(const std::filesystem::path& path) {
    return weights_from_text(read_file(path), path.string());
}

FeatureVector make_feature(const LatentModel& model, int h, const Window& x, int a) {
    const auto enc = model.encode(h, x, a);
    FeatureVector f;
    f.values = Eigen::Map<const Eigen::VectorXd>(enc.data(), static_cast<Eigen::Index>(enc.size()));
    f.step = h;
    f.window = x;
    f.action = a;
    return f;
}

void LRollout::validate() const {
    if (actions.size() != observations.size() || actions.empty())
        throw InvalidArgument("rollout: need one observation per action");
    Window x = start_window;
    for (std::size_t i = 0; i < actions.size(); ++i)
        x = window_shift(x, actions[i], observations[i]);
    if (x != end_window)
        throw InvalidArgument("rollout: end window does not match the shifted start window");
}

double q_value(const LatentModel& model, const WeightVector& w, const Window& x, int a) {
    if (w.weights.size() != model.n_latent())
        throw InvalidArgument("q_value: weight dimension does not match the latent space");
    const auto enc = model.encode(w.step, x, a);
    double acc = 0.0;
    for (int z = 0; z < model.n_latent(); ++z)
        acc += enc[static_cast<std::size_t>(z)] * w.weights[z];
    return acc;
}

double q_value_mc(const LatentModel& model, const WeightVector& w, const Window& x, int a,
                  int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw InvalidArgument("q_value_mc: need at least one sample");
    if (w.weights.size() != model.n_latent())
        throw InvalidArgument("q_value_mc: weight dimension does not match the latent space");
    const auto enc = model.encode(w.step, x, a);
    Rng rng(seed);
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i) acc += w.weights[rng.categorical(enc)];
    return acc / n_samples;
}

double q_total(const TabularPomdp& pomdp, const LatentModel& model, const WeightVector* w,
               const Window& x, int a) {
    const double r = pomdp.reward_at(x.current_obs(), a);
    return w == nullptr ? r : r + q_value(model, *w, x, a);
}

std::vector<TargetPair> lstep_targets(const std::vector<LRollout>& rollouts,
                                      const LatentModel& model, const TabularPomdp& pomdp, int h,
                                      const WeightVector* w_next) {
    std::vector<TargetPair> pairs;
    pairs.reserve(rollouts.size());
    for (const auto& rollout : rollouts) {
        TargetPair pair;
        pair.feature = make_feature(model, h, rollout.start_window, rollout.actions.at(0));
        pair.first_reward = pomdp.reward_at(rollout.start_window.current_obs(), rollout.actions.at(0));
        pair.target = rollout.reward_sum;
        if (w_next != nullptr) {
            if (!rollout.end_action.has_value())
                throw MissingEndAction("lstep_targets: rollout lacks the end action needed to bootstrap");
            pair.target += q_total(pomdp, model, w_next, rollout.end_window, *rollout.end_action);
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

WeightVector lspe_solve(const std::vector<std::pair<FeatureVector, double>>& pairs, double ridge,
                        int step) {
    if (pairs.empty()) throw InvalidArgument("lspe_solve: no pairs");
    if (ridge < 0.0) throw InvalidArgument("lspe_solve: ridge must be nonnegative");
    const Eigen::Index m = pairs.front().first.values.size();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(m);
    for (const auto& [f, y] : pairs) {
        gram.noalias() += f.values * f.values.transpose();
        moment.noalias() += y * f.values;
    }
    gram.diagonal().array() += ridge;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ridge == 0.0) {
        const auto d = ldlt.vectorD();
        const double d_max = d.cwiseAbs().maxCoeff();
        if (d.minCoeff() <= 1e-12 * std::max(d_max, 1.0))
            throw SingularSystem("lspe_solve: rank-deficient Gram matrix with ridge = 0");
    }
    Eigen::VectorXd w = ldlt.solve(moment);
    // One step of iterative refinement keeps the normal-equation residual
    // within the contract even for marginally conditioned systems.
    Eigen::VectorXd resid = moment - gram * w;
    w += ldlt.solve(resid);
    resid = moment - gram * w;
    const double rel = resid.norm() / std::max(1.0, moment.norm());
    if (!w.allFinite() || rel > 1e-8) {
        if (ridge == 0.0)
            throw SingularSystem("lspe_solve: rank-deficient Gram matrix with ridge = 0");
        throw SingularSystem("lspe_solve: normal equations too ill-conditioned (relative residual " +
                             std::to_string(rel) + ")");
    }
    return {step, std::move(w)};
}

WeightVector lspe_solve(const std::vector<TargetPair>& pairs, double ridge, int step) {
    std::vector<std::pair<FeatureVector, double>> flat;
    flat.reserve(pairs.size());
    for (const auto& p : pairs) flat.emplace_back(p.feature, p.target - p.first_reward);
    return lspe_solve(flat, ridge, step);
}

LRollout EnvRolloutSource::sample(int h, int window_len, const WindowPolicy& policy,
                                  Rng& rng) const {
    const int H = pomdp_.horizon;
    if (h < 0 || h >= H) throw InvalidArgument("rollout: step out of range");
    int s = rng.categorical(pomdp_.rho0);
    int o = rng.categorical(pomdp_.emit_row(s));
    Window x = initial_window(window_len, o);
    for (int t = 0; t < h; ++t) {
        const int a = policy.sample(t, x, rng);
        s = rng.categorical(pomdp_.trans_row(s, a));
        o = rng.categorical(pomdp_.emit_row(s));
        x = window_shift(x, a, o);
    }
    LRollout rollout;
    rollout.start_window = x;
    const int len = std::min(window_len, H - h);
    for (int i = 0; i < len; ++i) {
        const int a = policy.sample(h + i, x, rng);
        rollout.actions.push_back(a);
        rollout.reward_sum += pomdp_.reward_at(o, a);
        s = rng.categorical(pomdp_.trans_row(s, a));
        o = rng.categorical(pomdp_.emit_row(s));
        rollout.observations.push_back(o);
        x = window_shift(x, a, o);
    }
    rollout.end_window = x;
    if (h + len < H) rollout.end_action = policy.sample(h + len, x, rng);
    return rollout;
}

LRollout ModelRolloutSource::sample(int h, int window_len, const WindowPolicy& policy,
                                    Rng& rng) const {
    const int H = pomdp_.horizon;
    if (h < 0 || h >= H) throw InvalidArgument("rollout: step out of range");
    int o = rng.categorical(init_obs_);
    Window x = initial_window(window_len, o);
    for (int t = 0; t < h; ++t) {
        const int a = policy.sample(t, x, rng);
        o = rng.categorical(predicted_obs_prob(model_, t, x, a));
        x = window_shift(x, a, o);
    }
    LRollout rollout;
    rollout.start_window = x;
    const int len = std::min(window_len, H - h);
    for (int i = 0; i < len; ++i) {
        const int a = policy.sample(h + i, x, rng);
        rollout.actions.push_back(a);
        rollout.reward_sum += pomdp_.reward_at(o, a);
        o = rng.categorical(predicted_obs_prob(model_, h + i, x, a));
        rollout.observations.push_back(o);
        x = window_shift(x, a, o);
    }
    rollout.end_window = x;
    if (h + len < H) rollout.end_action = policy.sample(h + len, x, rng);
    return rollout;
}

std::vector<WeightVector> policy_evaluate(const RolloutSource& source, const LatentModel& model,
                                          const TabularPomdp& pomdp, const WindowPolicy& policy,
                                          int window_len, int n_rollouts, double ridge,
                                          std::uint64_t seed) {
    if (n_rollouts < 1) throw InvalidArgument("policy_evaluate: need at least one rollout");
    const int H = source.horizon();
    std::vector<WeightVector> weights(static_cast<std::size_t>(H));
    for (int h = H - 1; h >= 0; --h) {
        const WeightVector* w_next =
            (h + window_len < H) ? &weights[static_cast<std::size_t>(h + window_len)] : nullptr;
        Rng rng(derive_seed(seed, 0x901107, static_cast<std::uint64_t>(h)));
        std::vector<LRollout> rollouts;
        rollouts.reserve(static_cast<std::size_t>(n_rollouts));
        for (int i = 0; i < n_rollouts; ++i) rollouts.push_back(source.sample(h, window_len, policy, rng));
        const auto pairs = lstep_targets(rollouts, model, pomdp, h, w_next);
        weights[static_cast<std::size_t>(h)] = lspe_solve(pairs, ridge, h);
    }
    return weights;
}

double value_at_init(const TabularPomdp& pomdp, const LatentModel& model,
                     const std::vector<WeightVector>& weights, const WindowPolicy& policy,
                     int window_len) {
    const auto marg = initial_obs_marginal(pomdp);
    double value = 0.0;
    for (int o0 = 0; o0 < pomdp.n_obs; ++o0) {
        if (marg[static_cast<std::size_t>(o0)] <= 0.0) continue;
        const Window x0 = initial_window(window_len, o0);
        const auto pi = policy.row(0, x0);
        for (int a = 0; a < pomdp.n_actions; ++a) {
            if (pi[static_cast<std::size_t>(a)] == 0.0) continue;
            value += marg[static_cast<std::size_t>(o0)] * pi[static_cast<std::size_t>(a)] *
                     q_total(pomdp, model, &weights.at(0), x0, a);
        }
    }
    return value;
}

RepresentabilityResult verify_linear_representability(const TabularPomdp& pomdp,
                                                      const WindowPolicy& policy, int window_len,
                                                      int h, std::int64_t node_budget) {
    const double gap = decodability_gap(pomdp, window_len, pomdp.horizon - 1, node_budget);
    if (gap > 1e-9)
        throw NotDecodable("fixture is not empirically " + std::to_string(window_len) +
                           "-decodable (gap " + std::to_string(gap) + ")");
    const auto tree = exact_value_iteration(pomdp, &policy, window_len, node_budget);
    const auto groups = tree.window_groups(h);
    std::vector<std::pair<FeatureVector, double>> pairs;
    for (const auto& [x, members] : groups) {
        const auto& node = tree.depths[static_cast<std::size_t>(h)][static_cast<std::size_t>(members.front())];
        for (int a = 0; a < pomdp.n_actions; ++a) {
            FeatureVector f;
            f.values = Eigen::VectorXd::Zero(pomdp.n_states);
            for (int s = 0; s < pomdp.n_states; ++s) {
                const double bs = node.belief.probs[static_cast<std::size_t>(s)];
                if (bs == 0.0) continue;
                const auto row = pomdp.trans_row(s, a);
                for (int sn = 0; sn < pomdp.n_states; ++sn) f.values[sn] += bs * row[sn];
            }
            f.step = h;
            f.window = x;
            f.action = a;
            const double target = node.q[static_cast<std::size_t>(a)] - pomdp.reward_at(x.current_obs(), a);
            pairs.emplace_back(std::move(f), target);
        }
    }
    // Tiny ridge keeps the solve defined when some next states are
    // unreachable; its bias is far below the advertised tolerances.
    WeightVector w = lspe_solve(pairs, 1e-10, h);
    RepresentabilityResult result;
    result.w_fit = w;
    result.n_points = static_cast<int>(pairs.size());
    for (const auto& [f, y] : pairs) {
        const double resid = std::abs(f.values.dot(w.weights) - y);
        result.max_residual = std::max(result.max_residual, resid);
        result.mean_residual += resid;
    }
    if (!pairs.empty()) result.mean_residual /= static_cast<double>(pairs.size());
    return result;
}

}  // namespace winpomdp
