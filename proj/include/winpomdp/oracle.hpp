#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "winpomdp/pomdp.hpp"

namespace winpomdp {

inline constexpr std::int64_t kDefaultNodeBudget = 10'000'000;

// One node of the brute-force history tree: a full action-observation prefix
// together with its exact belief and reach probability.
struct HistoryNode {
    std::vector<int> history;  // o_0, a_0, o_1, ..., o_h
    Window window;             // trailing L-window of the history
    BeliefVector belief;
    double reach_prob = 0.0;   // under the evaluated (or greedy) policy
    std::vector<double> q;     // per action; empty at depth H
    double value = 0.0;
    // Children indexed into the next depth's node list, one per positive
    // probability (a, o') branch.
    std::vector<std::vector<std::pair<int, int>>> children;  // [a] -> list of (o', index)
};

struct HistoryTree {
    double value = 0.0;                          // expected return from the root
    std::vector<std::vector<HistoryNode>> depths;  // depth 0..H

    // Nodes at depth h grouped by their window.
    std::map<Window, std::vector<int>> window_groups(int h) const;
};

// Exhaustive expansion of every positive-probability history with beliefs
// from the recursive Bayes update, plus backward-induction values. With a
// null policy the tree carries optimal values (greedy maximization, ties
// toward the smallest action). Throws BudgetExceeded past `node_budget`.
HistoryTree exact_value_iteration(const TabularPomdp& pomdp, const WindowPolicy* policy,
                                  int window_len, std::int64_t node_budget = kDefaultNodeBudget);

// Maximum total-variation spread between exact beliefs that share the same
// length-L window, over all histories up to max_depth. Zero certifies
// empirical L-decodability to that depth.
double decodability_gap(const TabularPomdp& pomdp, int window_len, int max_depth,
                        std::int64_t node_budget = kDefaultNodeBudget);

// Per-step decodability gaps (depth h histories only), depths 0..max_depth.
std::vector<double> decodability_gap_by_depth(const TabularPomdp& pomdp, int window_len,
                                              int max_depth,
                                              std::int64_t node_budget = kDefaultNodeBudget);

// Reach-weighted summary of the exact beliefs behind each (step, window)
// pair under uniform action expansion: the mixture belief reproduces the
// exact observation dynamics P(o'|x, a) even when the POMDP is not
// L-decodable.
struct WindowBeliefEntry {
    BeliefVector mixture_belief;
    double weight = 0.0;      // reach probability mass under uniform actions
    double max_tv = 0.0;      // spread of beliefs pooled into this entry
};

struct WindowBeliefOracle {
    int window_len = 0;
    std::vector<std::map<Window, WindowBeliefEntry>> by_step;
};

WindowBeliefOracle window_belief_oracle(const TabularPomdp& pomdp, int window_len, int max_depth,
                                        std::int64_t node_budget = kDefaultNodeBudget);

}  // namespace winpomdp
