#include "winpomdp/agent.hpp"

#include <algorithm>
#include <cmath>

namespace winpomdp {

namespace {

// Planner window-space size guard.
std::int64_t planner_window_count(const TabularPomdp& pomdp, int window_len) {
    std::int64_t total = 0;
    for (int pad = 0; pad < window_len; ++pad) {
        std::int64_t n = 1;
        for (int i = 0; i < window_len - pad; ++i) n *= pomdp.n_obs;
        for (int i = 0; i < window_len - 1 - pad; ++i) n *= pomdp.n_actions;
        total += n;
        if (total > 100'000'000) break;
    }
    return total;
}

}  // namespace

void AgentConfig::validate(const TabularPomdp& pomdp) const {
    pomdp.validate();
    if (window_len < 1) throw InvalidArgument("agent: window length must be at least 1");
    if (episodes < 1) throw InvalidArgument("agent: episode count must be at least 1");
    if (pomdp.horizon < window_len)
        throw InvalidArgument("agent: horizon must be at least the window length");
    if (n_latent < 0) throw InvalidArgument("agent: latent size must be nonnegative");
    if (!(planner_ridge >= 0.0)) throw InvalidArgument("agent: planner ridge must be nonnegative");
    if (!(schedule_alpha > 0.0) || !(schedule_lambda > 0.0))
        throw InvalidArgument("agent: schedule constants must be positive");
    if (planner_window_count(pomdp, window_len) > 5'000'000)
        throw BudgetExceeded("agent: padded window space too large to enumerate");
}

double BonusTable::at(int h, const Window& x, int a) const {
    if (h < 0 || h >= static_cast<int>(by_step.size())) return 0.0;
    auto it = by_step[static_cast<std::size_t>(h)].find(x);
    if (it == by_step[static_cast<std::size_t>(h)].end()) return 0.0;
    return it->second.at(static_cast<std::size_t>(a));
}

BonusStats BonusTable::stats(int h) const {
    BonusStats s;
    if (h < 0 || h >= static_cast<int>(by_step.size())) return s;
    std::size_t n = 0;
    for (const auto& [x, row] : by_step[static_cast<std::size_t>(h)]) {
        for (double b : row) {
            s.mean += b;
            s.max = std::max(s.max, b);
            ++n;
        }
    }
    if (n > 0) s.mean /= static_cast<double>(n);
    return s;
}

CollectResult collect_rollout(const TabularPomdp& pomdp, const WindowPolicy& policy, int h,
                              int window_len, std::uint64_t seed) {
    const int H = pomdp.horizon;
    if (h < 0 || h >= H) throw InvalidArgument("collect_rollout: step out of range");
    Rng rng(seed);
    int s = rng.categorical(pomdp.rho0);
    int o = rng.categorical(pomdp.emit_row(s));
    Window x = initial_window(window_len, o);
    for (int t = 0; t < h; ++t) {
        const int a = policy.sample(t, x, rng);
        s = rng.categorical(pomdp.trans_row(s, a));
        o = rng.categorical(pomdp.emit_row(s));
        x = window_shift(x, a, o);
    }
    const int len = std::min(window_len, H - h);
    std::vector<TransitionRecord> records;
    records.reserve(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
        const int a = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(pomdp.n_actions));
        s = rng.categorical(pomdp.trans_row(s, a));
        const int o_next = rng.categorical(pomdp.emit_row(s));
        records.push_back({x, a, o_next});
        x = window_shift(x, a, o_next);
    }
    CollectResult result;
    if (len == window_len) {
        result.d_record = records[0];
        for (int i = 1; i < len; ++i) result.d_prime.emplace_back(h + i, records[static_cast<std::size_t>(i)]);
    } else {
        for (int i = 0; i < len; ++i) result.d_prime.emplace_back(h + i, records[static_cast<std::size_t>(i)]);
    }
    return result;
}

PlanResult plan(const LatentModel& model, const TabularPomdp& pomdp, const BonusTable* bonuses,
                PenaltyMode mode, int window_len, const std::vector<double>& init_obs_dist) {
    const int H = pomdp.horizon;
    if (static_cast<int>(init_obs_dist.size()) != pomdp.n_obs)
        throw InvalidArgument("plan: initial observation distribution has wrong size");
    WindowPolicy policy = WindowPolicy::make_table(pomdp.n_actions, H, window_len);
    std::map<Window, double> v_next;  // values at step h+1
    std::map<Window, double> v_cur;
    for (int h = H - 1; h >= 0; --h) {
        v_cur.clear();
        const int pad = pad_count_for_step(window_len, h);
        for (const Window& x : enumerate_windows(window_len, pomdp.n_obs, pomdp.n_actions, pad)) {
            const int o_h = x.current_obs();
            double best = 0.0;
            int best_a = 0;
            for (int a = 0; a < pomdp.n_actions; ++a) {
                double r_eff = pomdp.reward_at(o_h, a);
                if (mode == PenaltyMode::Add) {
                    r_eff += bonuses == nullptr ? 0.0 : bonuses->at(h, x, a);
                } else if (mode == PenaltyMode::Subtract) {
                    r_eff -= bonuses == nullptr ? 0.0 : bonuses->at(h, x, a);
                }
                double q = r_eff;
                if (h + 1 < H) {
                    const auto pred = predicted_obs_prob(model, h, x, a);
                    for (int o = 0; o < pomdp.n_obs; ++o) {
                        const double po = pred[static_cast<std::size_t>(o)];
                        if (po == 0.0) continue;
                        q += po * v_next.at(window_shift(x, a, o));
                    }
                }
                if (a == 0 || q > best) {
                    best = q;
                    best_a = a;
                }
            }
            v_cur[x] = best;
            std::vector<double> row(static_cast<std::size_t>(pomdp.n_actions), 0.0);
            row[static_cast<std::size_t>(best_a)] = 1.0;
            policy.set_row(h, x, std::move(row));
        }
        v_next = v_cur;
    }
    double total = 0.0;
    double value = 0.0;
    for (double p : init_obs_dist) total += p;
    if (total > 0.0) {
        for (int o0 = 0; o0 < pomdp.n_obs; ++o0) {
            const double p = init_obs_dist[static_cast<std::size_t>(o0)];
            if (p <= 0.0) continue;
            value += (p / total) * v_cur.at(initial_window(window_len, o0));
        }
    }
    return {std::move(policy), value};
}

namespace {

Eigen::VectorXd encode_feature(const LatentModel& model, int h, const Window& x, int a) {
    const auto enc = model.encode(h, x, a);
    return Eigen::Map<const Eigen::VectorXd>(enc.data(), static_cast<Eigen::Index>(enc.size()));
}

BonusTable build_bonus_table(const LatentModel& model, const TabularPomdp& pomdp,
                             const std::vector<TransitionDataset>& d, int window_len,
                             const BonusConfig& cfg) {
    const int H = pomdp.horizon;
    const int m = model.n_latent();
    BonusTable table;
    table.by_step.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        CovarianceAccumulator acc(m, cfg.lambda, h);
        if (h < static_cast<int>(d.size()))
            for (const auto& rec : d[static_cast<std::size_t>(h)].records)
                acc.add(encode_feature(model, h, rec.window, rec.action));
        const int pad = pad_count_for_step(window_len, h);
        for (const Window& x : enumerate_windows(window_len, pomdp.n_obs, pomdp.n_actions, pad)) {
            std::vector<double> row(static_cast<std::size_t>(pomdp.n_actions), 0.0);
            for (int a = 0; a < pomdp.n_actions; ++a) {
                bool seen = true;
                const auto enc = model.encode(h, x, a, &seen);
                if (!seen && cfg.truncate && cfg.mode == BonusConfig::Mode::Pessimism) {
                    // Zero coverage: the uniform fallback row is a placeholder,
                    // not a measurement, and a pessimistic value must not trust
                    // it, so the pair carries the maximal penalty. Optimism
                    // keeps the decaying ellipsoid form; a permanent cap would
                    // chase structurally unreachable windows forever.
                    row[static_cast<std::size_t>(a)] = cfg.truncation_cap;
                } else {
                    const Eigen::Map<const Eigen::VectorXd> f(enc.data(),
                                                              static_cast<Eigen::Index>(enc.size()));
                    row[static_cast<std::size_t>(a)] = bonus(acc, f, cfg);
                }
            }
            table.by_step[static_cast<std::size_t>(h)].emplace(x, std::move(row));
        }
    }
    return table;
}

std::vector<double> normalized_counts(const std::vector<double>& counts) {
    double total = 0.0;
    for (double c : counts) total += c;
    std::vector<double> out(counts.size(), 0.0);
    if (total > 0.0)
        for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] / total;
    return out;
}

double mean_model_tv(const LatentModel& model, const TabularPomdp& pomdp, int window_len) {
    double acc = 0.0;
    for (int h = 0; h < pomdp.horizon; ++h)
        acc += model_tv_error(model, pomdp, window_len, h,
                              uniform_reach_weighting(pomdp, window_len, h));
    return acc / pomdp.horizon;
}

}  // namespace

OnlineResult run_online(const TabularPomdp& pomdp, const AgentConfig& cfg) {
    cfg.validate(pomdp);
    const int H = pomdp.horizon;
    const int L = cfg.window_len;
    const int m = cfg.n_latent > 0 ? cfg.n_latent : pomdp.n_states;

    OnlineResult result;
    result.d.resize(static_cast<std::size_t>(H));
    result.d_prime.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        result.d[static_cast<std::size_t>(h)].step = h;
        result.d_prime[static_cast<std::size_t>(h)].step = h;
    }
    std::vector<double> init_counts(static_cast<std::size_t>(pomdp.n_obs), 0.0);

    WindowPolicy current = WindowPolicy::uniform(pomdp.n_actions, H);
    for (int k = 1; k <= cfg.episodes; ++k) {
        for (int h = 0; h < H; ++h) {
            const auto collected = collect_rollout(pomdp, current, h, L,
                                                   derive_seed(cfg.seed, 0xC0117EC7, static_cast<std::uint64_t>(k),
                                                               static_cast<std::uint64_t>(h)));
            if (collected.d_record.has_value())
                result.d[static_cast<std::size_t>(h)].records.push_back(*collected.d_record);
            for (const auto& [g, rec] : collected.d_prime)
                result.d_prime[static_cast<std::size_t>(g)].records.push_back(rec);
        }
        // The first-step windows record the episode-start observations.
        init_counts.assign(static_cast<std::size_t>(pomdp.n_obs), 0.0);
        for (const auto& rec : result.d[0].records)
            init_counts[static_cast<std::size_t>(rec.window.current_obs())] += 1.0;

        std::vector<TransitionDataset> fit_data;
        for (int h = 0; h < H; ++h) {
            TransitionDataset ds;
            ds.step = h;
            ds.records = result.d[static_cast<std::size_t>(h)].records;
            ds.records.insert(ds.records.end(), result.d_prime[static_cast<std::size_t>(h)].records.begin(),
                              result.d_prime[static_cast<std::size_t>(h)].records.end());
            fit_data.push_back(std::move(ds));
        }
        FitConfig fit_cfg = cfg.fit;
        fit_cfg.seed = derive_seed(cfg.seed, 0xF17F17, static_cast<std::uint64_t>(k));
        fit_cfg.n_obs = pomdp.n_obs;
        LatentModel model = fit_mle(fit_data, m, fit_cfg);

        EpisodeLog log;
        log.episode = k;
        PlanResult planned;
        if (cfg.bonus_enabled) {
            const Schedule sched = schedule(k, m, cfg.schedule_alpha, cfg.schedule_lambda);
            BonusConfig bcfg = cfg.bonus;
            bcfg.alpha = sched.alpha;
            bcfg.lambda = sched.lambda;
            bcfg.mode = BonusConfig::Mode::Optimism;
            const BonusTable bonuses = build_bonus_table(model, pomdp, result.d, L, bcfg);
            for (int h = 0; h < H; ++h) log.bonus_by_step.push_back(bonuses.stats(h));
            planned = plan(model, pomdp, &bonuses, PenaltyMode::Add, L, normalized_counts(init_counts));
        } else {
            log.bonus_by_step.assign(static_cast<std::size_t>(H), BonusStats{});
            planned = plan(model, pomdp, nullptr, PenaltyMode::None, L, normalized_counts(init_counts));
        }
        log.planning_value = planned.value;
        log.ret = exact_policy_value(pomdp, planned.policy, L);
        if (cfg.model_tv_diag) log.model_tv = mean_model_tv(model, pomdp, L);
        result.logs.push_back(std::move(log));
        current = planned.policy;
        result.policies.push_back(current);
        if (k == cfg.episodes) result.final_model = std::move(model);
    }
    return result;
}

OfflineDataset collect_offline_dataset(const TabularPomdp& pomdp, const WindowPolicy& behavior,
                                       int n_episodes, int window_len, std::uint64_t seed) {
    if (n_episodes < 1) throw InvalidArgument("offline: need at least one episode");
    OfflineDataset data;
    data.episodes = n_episodes;
    data.steps.resize(static_cast<std::size_t>(pomdp.horizon));
    for (int h = 0; h < pomdp.horizon; ++h) data.steps[static_cast<std::size_t>(h)].step = h;
    data.init_obs_freq.assign(static_cast<std::size_t>(pomdp.n_obs), 0.0);
    for (int e = 0; e < n_episodes; ++e) {
        Rng rng(derive_seed(seed, 0x0FF11E, static_cast<std::uint64_t>(e)));
        int s = rng.categorical(pomdp.rho0);
        int o = rng.categorical(pomdp.emit_row(s));
        data.init_obs_freq[static_cast<std::size_t>(o)] += 1.0;
        Window x = initial_window(window_len, o);
        for (int h = 0; h < pomdp.horizon; ++h) {
            const int a = behavior.sample(h, x, rng);
            s = rng.categorical(pomdp.trans_row(s, a));
            o = rng.categorical(pomdp.emit_row(s));
            data.steps[static_cast<std::size_t>(h)].records.push_back({x, a, o});
            x = window_shift(x, a, o);
        }
    }
    double total = 0.0;
    for (double c : data.init_obs_freq) total += c;
    for (double& c : data.init_obs_freq) c /= total;
    return data;
}

OfflineResult run_offline(const TabularPomdp& pomdp, const OfflineDataset& data,
                          const AgentConfig& cfg) {
    cfg.validate(pomdp);
    if (data.steps.empty()) throw EmptyDataset("run_offline: no datasets");
    for (const auto& ds : data.steps)
        if (ds.records.empty())
            throw EmptyDataset("run_offline: empty dataset at step " + std::to_string(ds.step));
    const int m = cfg.n_latent > 0 ? cfg.n_latent : pomdp.n_states;
    FitConfig fit_cfg = cfg.fit;
    fit_cfg.seed = derive_seed(cfg.seed, 0xF17F17, 0);
    fit_cfg.n_obs = pomdp.n_obs;
    LatentModel model = fit_mle(data.steps, m, fit_cfg);

    const Schedule sched = schedule(std::max(1, data.episodes), m, cfg.schedule_alpha, cfg.schedule_lambda);
    BonusConfig bcfg = cfg.bonus;
    bcfg.alpha = sched.alpha;
    bcfg.lambda = sched.lambda;
    bcfg.mode = BonusConfig::Mode::Pessimism;
    const BonusTable penalties = build_bonus_table(model, pomdp, data.steps, cfg.window_len, bcfg);
    PlanResult planned = plan(model, pomdp, &penalties, PenaltyMode::Subtract, cfg.window_len,
                              data.init_obs_freq);
    return {std::move(planned.policy), planned.value, std::move(model)};
}

EvalResult evaluate_policy(const TabularPomdp& pomdp, const WindowPolicy& policy, int n_episodes,
                           std::uint64_t seed) {
    if (n_episodes < 1) throw InvalidArgument("evaluate_policy: need at least one episode");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
        const double ret =
            sample_episode(pomdp, policy, derive_seed(seed, 0xE7A1, static_cast<std::uint64_t>(e)))
                .total_reward();
        sum += ret;
        sum_sq += ret * ret;
    }
    const double mean = sum / n_episodes;
    EvalResult out;
    out.mean = mean;
    if (n_episodes > 1) {
        const double var = std::max(0.0, (sum_sq - n_episodes * mean * mean) / (n_episodes - 1));
        out.std_error = std::sqrt(var / n_episodes);
    }
    return out;
}

double exact_policy_value(const TabularPomdp& pomdp, const WindowPolicy& policy, int window_len) {
    std::map<Window, std::vector<double>> dist;
    for (int s = 0; s < pomdp.n_states; ++s) {
        const double rs = pomdp.rho0[static_cast<std::size_t>(s)];
        if (rs == 0.0) continue;
        for (int o = 0; o < pomdp.n_obs; ++o) {
            const double p = rs * pomdp.emit_at(s, o);
            if (p == 0.0) continue;
            auto& vec = dist.try_emplace(initial_window(window_len, o),
                                         std::vector<double>(static_cast<std::size_t>(pomdp.n_states), 0.0))
                            .first->second;
            vec[static_cast<std::size_t>(s)] += p;
        }
    }
    double value = 0.0;
    for (int h = 0; h < pomdp.horizon; ++h) {
        std::map<Window, std::vector<double>> next;
        for (const auto& [x, vec] : dist) {
            const auto pi = policy.row(h, x);
            const int o_x = x.current_obs();
            double mass = 0.0;
            for (double v : vec) mass += v;
            for (int a = 0; a < pomdp.n_actions; ++a) {
                const double pa = pi[static_cast<std::size_t>(a)];
                if (pa == 0.0) continue;
                value += mass * pa * pomdp.reward_at(o_x, a);
                for (int s = 0; s < pomdp.n_states; ++s) {
                    const double ps = vec[static_cast<std::size_t>(s)] * pa;
                    if (ps == 0.0) continue;
                    const auto row = pomdp.trans_row(s, a);
                    for (int sn = 0; sn < pomdp.n_states; ++sn) {
                        const double pt = ps * row[sn];
                        if (pt == 0.0) continue;
                        const auto erow = pomdp.emit_row(sn);
                        for (int o = 0; o < pomdp.n_obs; ++o) {
                            const double po = pt * erow[o];
                            if (po == 0.0) continue;
                            auto& nvec = next.try_emplace(window_shift(x, a, o),
                                                          std::vector<double>(
                                                              static_cast<std::size_t>(pomdp.n_states), 0.0))
                                             .first->second;
                            nvec[static_cast<std::size_t>(sn)] += po;
                        }
                    }
                }
            }
        }
        dist = std::move(next);
    }
    return value;
}

}  // namespace winpomdp
