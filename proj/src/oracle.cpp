#include "winpomdp/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace winpomdp {

std::map<Window, std::vector<int>> HistoryTree::window_groups(int h) const {
    std::map<Window, std::vector<int>> groups;
    const auto& nodes = depths.at(static_cast<std::size_t>(h));
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
        groups[nodes[static_cast<std::size_t>(i)].window].push_back(i);
    return groups;
}

namespace {

struct TreeBuilder {
    const TabularPomdp& pomdp;
    const WindowPolicy* policy;
    int window_len;
    std::int64_t budget;
    std::int64_t nodes = 0;
    HistoryTree tree;

    void charge() {
        if (++nodes > budget)
            throw BudgetExceeded("history tree exceeds node budget of " + std::to_string(budget));
    }

    // Builds the subtree under (depth h, given history/belief) and returns the
    // node's index at depth h. Values are filled in post-order.
    int build(int h, std::vector<int> history, Window window, BeliefVector belief) {
        charge();
        const int H = pomdp.horizon;
        HistoryNode node;
        node.history = std::move(history);
        node.window = std::move(window);
        node.belief = std::move(belief);
        if (h < H) {
            const int o_h = node.window.current_obs();
            node.q.assign(static_cast<std::size_t>(pomdp.n_actions), 0.0);
            node.children.assign(static_cast<std::size_t>(pomdp.n_actions), {});
            for (int a = 0; a < pomdp.n_actions; ++a) {
                const auto p_next = obs_prob(pomdp, node.belief, a);
                double cont = 0.0;
                for (int o = 0; o < pomdp.n_obs; ++o) {
                    const double po = p_next[static_cast<std::size_t>(o)];
                    if (po <= 0.0) continue;
                    std::vector<int> child_hist = node.history;
                    child_hist.push_back(a);
                    child_hist.push_back(o);
                    const int idx = build(h + 1, std::move(child_hist),
                                          window_shift(node.window, a, o),
                                          belief_update(pomdp, node.belief, a, o));
                    node.children[static_cast<std::size_t>(a)].emplace_back(o, idx);
                    cont += po * tree.depths[static_cast<std::size_t>(h) + 1][static_cast<std::size_t>(idx)].value;
                }
                node.q[static_cast<std::size_t>(a)] = pomdp.reward_at(o_h, a) + cont;
            }
            if (policy != nullptr) {
                const auto pi = policy->row(h, node.window);
                node.value = 0.0;
                for (int a = 0; a < pomdp.n_actions; ++a)
                    node.value += pi[static_cast<std::size_t>(a)] * node.q[static_cast<std::size_t>(a)];
            } else {
                node.value = *std::max_element(node.q.begin(), node.q.end());
            }
        }
        tree.depths[static_cast<std::size_t>(h)].push_back(std::move(node));
        return static_cast<int>(tree.depths[static_cast<std::size_t>(h)].size()) - 1;
    }
};

}  // namespace

HistoryTree exact_value_iteration(const TabularPomdp& pomdp, const WindowPolicy* policy,
                                  int window_len, std::int64_t node_budget) {
    pomdp.validate();
    TreeBuilder builder{pomdp, policy, window_len, node_budget, 0, {}};
    builder.tree.depths.resize(static_cast<std::size_t>(pomdp.horizon) + 1);
    const auto marg = initial_obs_marginal(pomdp);
    std::vector<std::pair<int, int>> roots;  // (o0, index)
    double value = 0.0;
    for (int o0 = 0; o0 < pomdp.n_obs; ++o0) {
        if (marg[static_cast<std::size_t>(o0)] <= 0.0) continue;
        const int idx = builder.build(0, {o0}, initial_window(window_len, o0), belief_init(pomdp, o0));
        roots.emplace_back(o0, idx);
        value += marg[static_cast<std::size_t>(o0)] * builder.tree.depths[0][static_cast<std::size_t>(idx)].value;
    }
    builder.tree.value = value;

    // Forward pass for reach probabilities, greedy branching in optimal mode.
    auto& depths = builder.tree.depths;
    for (const auto& [o0, idx] : roots)
        depths[0][static_cast<std::size_t>(idx)].reach_prob = marg[static_cast<std::size_t>(o0)];
    for (int h = 0; h < pomdp.horizon; ++h) {
        for (auto& node : depths[static_cast<std::size_t>(h)]) {
            if (node.reach_prob == 0.0 && h > 0) continue;
            std::vector<double> pi;
            if (policy != nullptr) {
                pi = policy->row(h, node.window);
            } else {
                pi.assign(static_cast<std::size_t>(pomdp.n_actions), 0.0);
                const int best = static_cast<int>(std::max_element(node.q.begin(), node.q.end()) - node.q.begin());
                pi[static_cast<std::size_t>(best)] = 1.0;
            }
            for (int a = 0; a < pomdp.n_actions; ++a) {
                if (pi[static_cast<std::size_t>(a)] == 0.0) continue;
                const auto p_next = obs_prob(pomdp, node.belief, a);
                for (const auto& [o, child] : node.children[static_cast<std::size_t>(a)]) {
                    depths[static_cast<std::size_t>(h) + 1][static_cast<std::size_t>(child)].reach_prob +=
                        node.reach_prob * pi[static_cast<std::size_t>(a)] * p_next[static_cast<std::size_t>(o)];
                }
            }
        }
    }
    return builder.tree;
}

namespace {

// Enumerates every positive-probability history to max_depth and feeds
// (depth, window, belief, uniform-action reach weight) to the sink.
template <typename Sink>
void walk_histories(const TabularPomdp& pomdp, int window_len, int max_depth,
                    std::int64_t node_budget, Sink&& sink) {
    pomdp.validate();
    if (max_depth > pomdp.horizon)
        throw InvalidArgument("history depth exceeds the fixture horizon");
    std::int64_t nodes = 0;
    const auto marg = initial_obs_marginal(pomdp);

    struct Frame {
        int depth;
        Window window;
        BeliefVector belief;
        double weight;
    };
    std::vector<Frame> stack;
    for (int o0 = pomdp.n_obs - 1; o0 >= 0; --o0) {
        if (marg[static_cast<std::size_t>(o0)] <= 0.0) continue;
        stack.push_back({0, initial_window(window_len, o0), belief_init(pomdp, o0),
                         marg[static_cast<std::size_t>(o0)]});
    }
    const double u = 1.0 / pomdp.n_actions;
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (++nodes > node_budget)
            throw BudgetExceeded("history enumeration exceeds node budget of " +
                                 std::to_string(node_budget));
        sink(f.depth, f.window, f.belief, f.weight);
        if (f.depth >= max_depth) continue;
        for (int a = 0; a < pomdp.n_actions; ++a) {
            const auto p_next = obs_prob(pomdp, f.belief, a);
            for (int o = 0; o < pomdp.n_obs; ++o) {
                const double po = p_next[static_cast<std::size_t>(o)];
                if (po <= 0.0) continue;
                stack.push_back({f.depth + 1, window_shift(f.window, a, o),
                                 belief_update(pomdp, f.belief, a, o), f.weight * u * po});
            }
        }
    }
}

}  // namespace

double decodability_gap(const TabularPomdp& pomdp, int window_len, int max_depth,
                        std::int64_t node_budget) {
    std::map<Window, std::vector<BeliefVector>> groups;
    walk_histories(pomdp, window_len, max_depth, node_budget,
                   [&](int, const Window& x, const BeliefVector& b, double) {
                       groups[x].push_back(b);
                   });
    double gap = 0.0;
    for (const auto& [x, beliefs] : groups) {
        for (std::size_t i = 0; i < beliefs.size(); ++i)
            for (std::size_t j = i + 1; j < beliefs.size(); ++j)
                gap = std::max(gap, tv_distance(beliefs[i].probs, beliefs[j].probs));
    }
    return gap;
}

std::vector<double> decodability_gap_by_depth(const TabularPomdp& pomdp, int window_len,
                                              int max_depth, std::int64_t node_budget) {
    std::map<std::pair<int, Window>, std::vector<BeliefVector>> groups;
    walk_histories(pomdp, window_len, max_depth, node_budget,
                   [&](int h, const Window& x, const BeliefVector& b, double) {
                       groups[{h, x}].push_back(b);
                   });
    std::vector<double> gaps(static_cast<std::size_t>(max_depth) + 1, 0.0);
    for (const auto& [key, beliefs] : groups) {
        double& gap = gaps[static_cast<std::size_t>(key.first)];
        for (std::size_t i = 0; i < beliefs.size(); ++i)
            for (std::size_t j = i + 1; j < beliefs.size(); ++j)
                gap = std::max(gap, tv_distance(beliefs[i].probs, beliefs[j].probs));
    }
    return gaps;
}

WindowBeliefOracle window_belief_oracle(const TabularPomdp& pomdp, int window_len, int max_depth,
                                        std::int64_t node_budget) {
    WindowBeliefOracle oracle;
    oracle.window_len = window_len;
    oracle.by_step.resize(static_cast<std::size_t>(max_depth) + 1);
    std::map<std::pair<int, Window>, std::vector<std::pair<BeliefVector, double>>> groups;
    walk_histories(pomdp, window_len, max_depth, node_budget,
                   [&](int h, const Window& x, const BeliefVector& b, double w) {
                       groups[{h, x}].emplace_back(b, w);
                   });
    for (const auto& [key, members] : groups) {
        WindowBeliefEntry entry;
        entry.mixture_belief.probs.assign(static_cast<std::size_t>(pomdp.n_states), 0.0);
        for (const auto& [b, w] : members) {
            entry.weight += w;
            for (int s = 0; s < pomdp.n_states; ++s)
                entry.mixture_belief.probs[static_cast<std::size_t>(s)] += w * b.probs[static_cast<std::size_t>(s)];
        }
        if (entry.weight > 0.0)
            for (double& v : entry.mixture_belief.probs) v /= entry.weight;
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j)
                entry.max_tv =
                    std::max(entry.max_tv, tv_distance(members[i].first.probs, members[j].first.probs));
        oracle.by_step[static_cast<std::size_t>(key.first)].emplace(key.second, std::move(entry));
    }
    return oracle;
}

}  // namespace winpomdp
