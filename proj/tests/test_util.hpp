#pragma once

#include <vector>

#include "winpomdp/agent.hpp"
#include "winpomdp/oracle.hpp"
#include "winpomdp/value.hpp"

namespace winpomdp::testutil {

// Exhaustive one-step rollouts on a deterministic fixture: one rollout per
// (reachable window at step h, first action), with the continuation action
// taken greedily from the (deterministic) policy. Requires deterministic
// transitions and emissions so each (x, a) has a single continuation.
inline std::vector<LRollout> exhaustive_rollouts(const TabularPomdp& pomdp,
                                                 const HistoryTree& tree,
                                                 const WindowPolicy& policy, int h,
                                                 int window_len) {
    std::vector<LRollout> rollouts;
    const auto groups = tree.window_groups(h);
    const int H = pomdp.horizon;
    const int len = std::min(window_len, H - h);
    for (const auto& [x, members] : groups) {
        const auto& node = tree.depths[static_cast<std::size_t>(h)][static_cast<std::size_t>(members[0])];
        for (int a0 = 0; a0 < pomdp.n_actions; ++a0) {
            LRollout rollout;
            rollout.start_window = x;
            BeliefVector belief = node.belief;
            Window cur = x;
            int action = a0;
            for (int i = 0; i < len; ++i) {
                rollout.actions.push_back(action);
                rollout.reward_sum += pomdp.reward_at(cur.current_obs(), action);
                const auto po = obs_prob(pomdp, belief, action);
                int o_next = -1;
                for (int o = 0; o < pomdp.n_obs; ++o) {
                    if (po[static_cast<std::size_t>(o)] > 1e-12) {
                        if (o_next >= 0) throw InvalidArgument("exhaustive rollouts need a deterministic fixture");
                        o_next = o;
                    }
                }
                belief = belief_update(pomdp, belief, action, o_next);
                rollout.observations.push_back(o_next);
                cur = window_shift(cur, action, o_next);
                if (i + 1 < len) action = policy.greedy(h + i + 1, cur);
            }
            rollout.end_window = cur;
            if (h + len < H) rollout.end_action = policy.greedy(h + len, cur);
            rollouts.push_back(std::move(rollout));
        }
    }
    return rollouts;
}

struct ExhaustiveLspe {
    HistoryTree tree;
    std::vector<WeightVector> weights;
};

// Backward recursion over exhaustive deterministic rollouts with exact
// features; on a decodable deterministic fixture this reproduces dynamic
// programming exactly.
inline ExhaustiveLspe exhaustive_lspe(const TabularPomdp& pomdp, const LatentModel& model,
                                      const WindowPolicy& policy, int window_len, double ridge) {
    ExhaustiveLspe out;
    out.tree = exact_value_iteration(pomdp, &policy, window_len);
    const int H = pomdp.horizon;
    out.weights.resize(static_cast<std::size_t>(H));
    for (int h = H - 1; h >= 0; --h) {
        const WeightVector* w_next =
            (h + window_len < H) ? &out.weights[static_cast<std::size_t>(h + window_len)] : nullptr;
        const auto rollouts = exhaustive_rollouts(pomdp, out.tree, policy, h, window_len);
        const auto pairs = lstep_targets(rollouts, model, pomdp, h, w_next);
        out.weights[static_cast<std::size_t>(h)] = lspe_solve(pairs, ridge, h);
    }
    return out;
}

}  // namespace winpomdp::testutil
