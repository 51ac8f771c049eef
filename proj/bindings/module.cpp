#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "winpomdp/agent.hpp"
#include "winpomdp/explore.hpp"
#include "winpomdp/latent.hpp"
#include "winpomdp/oracle.hpp"
#include "winpomdp/pomdp.hpp"
#include "winpomdp/value.hpp"

namespace py = pybind11;
using namespace winpomdp;

namespace {

std::string window_repr(const Window& x) {
    std::string s = "Window(obs=[";
    for (std::size_t i = 0; i < x.obs.size(); ++i)
        s += (i ? "," : "") + std::to_string(x.obs[i]);
    s += "], acts=[";
    for (std::size_t i = 0; i < x.acts.size(); ++i)
        s += (i ? "," : "") + std::to_string(x.acts[i]);
    return s + "])";
}

}  // namespace

PYBIND11_MODULE(_winpomdp, m) {
    m.doc() = "Windowed latent-variable RL toolkit for tabular POMDPs";

    py::register_exception<ZeroProbabilityObservation>(m, "ZeroProbabilityObservation");
    py::register_exception<BudgetExceeded>(m, "BudgetExceeded");
    py::register_exception<EmptyDataset>(m, "EmptyDataset");
    py::register_exception<MissingEndAction>(m, "MissingEndAction");
    py::register_exception<SingularSystem>(m, "SingularSystem");
    py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefinite");
    py::register_exception<NotDecodable>(m, "NotDecodable");
    py::register_exception<ParseError>(m, "ParseError");

    py::class_<TabularPomdp>(m, "TabularPomdp")
        .def(py::init<>())
        .def_readwrite("n_states", &TabularPomdp::n_states)
        .def_readwrite("n_actions", &TabularPomdp::n_actions)
        .def_readwrite("n_obs", &TabularPomdp::n_obs)
        .def_readwrite("horizon", &TabularPomdp::horizon)
        .def_readwrite("rho0", &TabularPomdp::rho0)
        .def_readwrite("trans", &TabularPomdp::trans)
        .def_readwrite("emit", &TabularPomdp::emit)
        .def_readwrite("reward", &TabularPomdp::reward)
        .def("validate", &TabularPomdp::validate)
        .def("trans_at", &TabularPomdp::trans_at)
        .def("emit_at", &TabularPomdp::emit_at)
        .def("reward_at", &TabularPomdp::reward_at)
        .def("to_text", [](const TabularPomdp& p) { return pomdp_to_text(p); });

    m.def("flip_pomdp", &flip_pomdp, py::arg("eta"), py::arg("horizon") = 2);
    m.def("lock_pomdp", &lock_pomdp, py::arg("window_len"), py::arg("code_length"),
          py::arg("horizon") = -1, py::arg("n_actions") = 4);
    m.def("gridmask_pomdp", &gridmask_pomdp, py::arg("n_pos") = 4, py::arg("horizon") = 6);
    m.def("load_pomdp", &load_pomdp, py::arg("path"));
    m.def("save_pomdp", &save_pomdp, py::arg("pomdp"), py::arg("path"));
    m.def("pomdp_from_text", &pomdp_from_text, py::arg("text"), py::arg("name") = "<string>");

    py::class_<BeliefVector>(m, "BeliefVector")
        .def(py::init([](std::vector<double> probs) {
                 BeliefVector b;
                 b.probs = std::move(probs);
                 return b;
             }),
             py::arg("probs"))
        .def_readwrite("probs", &BeliefVector::probs)
        .def("validate", &BeliefVector::validate);

    m.def("belief_init", &belief_init, py::arg("pomdp"), py::arg("o0"));
    m.def("belief_update", &belief_update, py::arg("pomdp"), py::arg("belief"), py::arg("action"),
          py::arg("o_next"));
    m.def("obs_prob", &obs_prob, py::arg("pomdp"), py::arg("belief"), py::arg("action"));
    m.def("initial_obs_marginal", &initial_obs_marginal, py::arg("pomdp"));

    py::class_<Window>(m, "Window")
        .def(py::init([](std::vector<int> obs, std::vector<int> acts) {
                 Window x;
                 x.obs = std::move(obs);
                 x.acts = std::move(acts);
                 x.validate();
                 return x;
             }),
             py::arg("obs"), py::arg("acts"))
        .def_readonly("obs", &Window::obs)
        .def_readonly("acts", &Window::acts)
        .def_property_readonly("window_len", &Window::window_len)
        .def("current_obs", &Window::current_obs)
        .def("pad_count", &Window::pad_count)
        .def("__eq__", [](const Window& a, const Window& b) { return a == b; })
        .def("__lt__", [](const Window& a, const Window& b) { return a < b; })
        .def("__hash__",
             [](const Window& x) {
                 std::size_t h = 1469598103934665603ULL;
                 for (int v : x.obs) h = (h ^ static_cast<std::size_t>(v + 2)) * 1099511628211ULL;
                 for (int v : x.acts) h = (h ^ static_cast<std::size_t>(v + 2)) * 1099511628211ULL;
                 return h;
             })
        .def("__repr__", &window_repr);

    m.attr("PAD") = kPad;
    m.def("initial_window", &initial_window, py::arg("window_len"), py::arg("o0"));
    m.def("window_shift", &window_shift, py::arg("window"), py::arg("action"), py::arg("o_next"));
    m.def("enumerate_windows", &enumerate_windows, py::arg("window_len"), py::arg("n_obs"),
          py::arg("n_actions"), py::arg("pad"));
    m.def("pad_count_for_step", &pad_count_for_step, py::arg("window_len"), py::arg("step"));

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("observations", &Trajectory::observations)
        .def_readonly("actions", &Trajectory::actions)
        .def_readonly("rewards", &Trajectory::rewards)
        .def_readonly("latent_states", &Trajectory::latent_states)
        .def("total_reward", &Trajectory::total_reward);

    py::class_<WindowPolicy> policy(m, "WindowPolicy");
    policy.def_static("uniform", &WindowPolicy::uniform, py::arg("n_actions"), py::arg("horizon"))
        .def_static("constant", &WindowPolicy::constant, py::arg("action"), py::arg("n_actions"),
                    py::arg("horizon"))
        .def_static("random_deterministic", &WindowPolicy::random_deterministic, py::arg("pomdp"),
                    py::arg("window_len"), py::arg("seed"))
        .def_static("make_table", &WindowPolicy::make_table, py::arg("n_actions"),
                    py::arg("horizon"), py::arg("window_len"))
        .def("row", &WindowPolicy::row, py::arg("step"), py::arg("window"))
        .def("set_row", &WindowPolicy::set_row, py::arg("step"), py::arg("window"), py::arg("probs"))
        .def("greedy", &WindowPolicy::greedy, py::arg("step"), py::arg("window"))
        .def_property_readonly("n_actions", &WindowPolicy::n_actions)
        .def_property_readonly("horizon", &WindowPolicy::horizon)
        .def_property_readonly("window_len", &WindowPolicy::window_len)
        .def("to_text", &WindowPolicy::to_text)
        .def_static("from_text", &WindowPolicy::from_text, py::arg("text"),
                    py::arg("name") = "<string>")
        .def("save", &WindowPolicy::save, py::arg("path"))
        .def_static("load", &WindowPolicy::load, py::arg("path"));

    m.def("sample_episode", &sample_episode, py::arg("pomdp"), py::arg("policy"), py::arg("seed"));

    py::class_<HistoryNode>(m, "HistoryNode")
        .def_readonly("history", &HistoryNode::history)
        .def_readonly("window", &HistoryNode::window)
        .def_readonly("belief", &HistoryNode::belief)
        .def_readonly("reach_prob", &HistoryNode::reach_prob)
        .def_readonly("q", &HistoryNode::q)
        .def_readonly("value", &HistoryNode::value);

    py::class_<HistoryTree>(m, "HistoryTree")
        .def_readonly("value", &HistoryTree::value)
        .def_readonly("depths", &HistoryTree::depths)
        .def("window_groups", &HistoryTree::window_groups, py::arg("depth"));

    m.def(
        "exact_value_iteration",
        [](const TabularPomdp& pomdp, const WindowPolicy* policy, int window_len,
           std::int64_t budget) { return exact_value_iteration(pomdp, policy, window_len, budget); },
        py::arg("pomdp"), py::arg("policy") = nullptr, py::arg("window_len") = 1,
        py::arg("node_budget") = kDefaultNodeBudget);
    m.def("decodability_gap", &decodability_gap, py::arg("pomdp"), py::arg("window_len"),
          py::arg("max_depth"), py::arg("node_budget") = kDefaultNodeBudget);
    m.def("decodability_gap_by_depth", &decodability_gap_by_depth, py::arg("pomdp"),
          py::arg("window_len"), py::arg("max_depth"), py::arg("node_budget") = kDefaultNodeBudget);

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_readwrite("max_iters", &FitConfig::max_iters)
        .def_readwrite("tol", &FitConfig::tol)
        .def_readwrite("floor_prob", &FitConfig::floor_prob)
        .def_readwrite("seed", &FitConfig::seed)
        .def_readwrite("n_latent", &FitConfig::n_latent)
        .def_readwrite("n_obs", &FitConfig::n_obs);

    py::class_<TransitionRecord>(m, "TransitionRecord")
        .def(py::init([](Window w, int a, int o) { return TransitionRecord{std::move(w), a, o}; }),
             py::arg("window"), py::arg("action"), py::arg("next_obs"))
        .def_readwrite("window", &TransitionRecord::window)
        .def_readwrite("action", &TransitionRecord::action)
        .def_readwrite("next_obs", &TransitionRecord::next_obs);

    py::class_<TransitionDataset>(m, "TransitionDataset")
        .def(py::init([](int step, std::vector<TransitionRecord> records) {
                 TransitionDataset d;
                 d.step = step;
                 d.records = std::move(records);
                 return d;
             }),
             py::arg("step"), py::arg("records") = std::vector<TransitionRecord>{})
        .def_readwrite("step", &TransitionDataset::step)
        .def_readwrite("records", &TransitionDataset::records);

    py::class_<LatentModel>(m, "LatentModel")
        .def(py::init<int, int, int, int>(), py::arg("n_latent"), py::arg("n_obs"),
             py::arg("window_len"), py::arg("n_steps"))
        .def_property_readonly("n_latent", &LatentModel::n_latent)
        .def_property_readonly("n_obs", &LatentModel::n_obs)
        .def_property_readonly("window_len", &LatentModel::window_len)
        .def_property_readonly("n_steps", &LatentModel::n_steps)
        .def(
            "encode",
            [](const LatentModel& model, int h, const Window& x, int a) {
                bool seen = true;
                auto row = model.encode(h, x, a, &seen);
                return std::make_pair(std::move(row), seen);
            },
            py::arg("step"), py::arg("window"), py::arg("action"),
            "Returns (probabilities, seen); unseen pairs fall back to the uniform row")
        .def("decode_row", &LatentModel::decode_row, py::arg("step"), py::arg("z"))
        .def("set_encode", &LatentModel::set_encode, py::arg("step"), py::arg("window"),
             py::arg("action"), py::arg("probs"))
        .def("set_decode", &LatentModel::set_decode, py::arg("step"), py::arg("z"), py::arg("probs"))
        .def("validate", &LatentModel::validate)
        .def("to_text", &LatentModel::to_text)
        .def_static("from_text", &LatentModel::from_text, py::arg("text"),
                    py::arg("name") = "<string>")
        .def("save", &LatentModel::save, py::arg("path"))
        .def_static("load", &LatentModel::load, py::arg("path"));

    m.def("predicted_obs_prob", &predicted_obs_prob, py::arg("model"), py::arg("step"),
          py::arg("window"), py::arg("action"));
    m.def("exact_posterior", &exact_posterior, py::arg("model"), py::arg("step"), py::arg("window"),
          py::arg("action"), py::arg("o_next"));
    m.def(
        "elbo",
        [](const LatentModel& model, const std::vector<double>& q_row, int h, const Window& x,
           int a, int o_next) { return elbo(model, q_row, h, x, a, o_next); },
        py::arg("model"), py::arg("q_row"), py::arg("step"), py::arg("window"), py::arg("action"),
        py::arg("o_next"));
    m.def("fit_mle", &fit_mle, py::arg("datasets"), py::arg("n_latent"), py::arg("config"));
    m.def(
        "fit_mle_detailed",
        [](const std::vector<TransitionDataset>& datasets, int n_latent, const FitConfig& config) {
            auto result = fit_mle_detailed(datasets, n_latent, config);
            return std::make_tuple(std::move(result.model), std::move(result.ll_trace),
                                   std::move(result.iterations));
        },
        py::arg("datasets"), py::arg("n_latent"), py::arg("config"),
        "Returns (model, per-step log-likelihood traces, per-step iteration counts)");
    m.def(
        "floored_distribution",
        [](const std::vector<double>& weights, double floor_prob) {
            return floored_distribution(weights, floor_prob);
        },
        py::arg("weights"), py::arg("floor_prob"));
    m.def("exact_latent_model", &exact_latent_model, py::arg("pomdp"), py::arg("window_len"),
          py::arg("node_budget") = kDefaultNodeBudget);
    m.def(
        "model_tv_error",
        [](const LatentModel& model, const TabularPomdp& pomdp, int window_len, int h,
           const std::vector<std::tuple<Window, int, double>>& weighting, std::int64_t budget) {
            std::map<std::pair<Window, int>, double> w;
            for (const auto& [x, a, v] : weighting) w[{x, a}] = v;
            return model_tv_error(model, pomdp, window_len, h, w, budget);
        },
        py::arg("model"), py::arg("pomdp"), py::arg("window_len"), py::arg("step"),
        py::arg("weighting"), py::arg("node_budget") = kDefaultNodeBudget,
        "weighting: list of (window, action, weight) triples");
    m.def(
        "uniform_reach_weighting",
        [](const TabularPomdp& pomdp, int window_len, int h, std::int64_t budget) {
            std::vector<std::tuple<Window, int, double>> out;
            for (const auto& [key, v] : uniform_reach_weighting(pomdp, window_len, h, budget))
                out.emplace_back(key.first, key.second, v);
            return out;
        },
        py::arg("pomdp"), py::arg("window_len"), py::arg("step"),
        py::arg("node_budget") = kDefaultNodeBudget);

    py::class_<WeightVector>(m, "WeightVector")
        .def(py::init([](int step, const std::vector<double>& w) {
                 WeightVector out;
                 out.step = step;
                 out.weights =
                     Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
                 return out;
             }),
             py::arg("step"), py::arg("weights"))
        .def_readwrite("step", &WeightVector::step)
        .def_property(
            "weights",
            [](const WeightVector& w) {
                return std::vector<double>(w.weights.data(), w.weights.data() + w.weights.size());
            },
            [](WeightVector& w, const std::vector<double>& v) {
                w.weights =
                    Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
            });

    m.def("q_value", &q_value, py::arg("model"), py::arg("weights"), py::arg("window"),
          py::arg("action"));
    m.def("q_value_mc", &q_value_mc, py::arg("model"), py::arg("weights"), py::arg("window"),
          py::arg("action"), py::arg("n_samples"), py::arg("seed"));
    m.def(
        "q_total",
        [](const TabularPomdp& pomdp, const LatentModel& model, const WeightVector& w,
           const Window& x, int a) { return q_total(pomdp, model, &w, x, a); },
        py::arg("pomdp"), py::arg("model"), py::arg("weights"), py::arg("window"),
        py::arg("action"));
    m.def(
        "lspe_solve",
        [](const std::vector<std::pair<std::vector<double>, double>>& pairs, double ridge,
           int step) {
            std::vector<std::pair<FeatureVector, double>> flat;
            flat.reserve(pairs.size());
            for (const auto& [values, y] : pairs) {
                FeatureVector f;
                f.values = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                             static_cast<Eigen::Index>(values.size()));
                f.step = step;
                flat.emplace_back(std::move(f), y);
            }
            return lspe_solve(flat, ridge, step);
        },
        py::arg("pairs"), py::arg("ridge"), py::arg("step") = 0,
        "pairs: list of (feature vector, target)");
    m.def(
        "policy_evaluate",
        [](const TabularPomdp& pomdp, const LatentModel& model, const WindowPolicy& policy,
           int window_len, int n_rollouts, double ridge, std::uint64_t seed) {
            EnvRolloutSource source(pomdp);
            return policy_evaluate(source, model, pomdp, policy, window_len, n_rollouts, ridge,
                                   seed);
        },
        py::arg("pomdp"), py::arg("model"), py::arg("policy"), py::arg("window_len"),
        py::arg("n_rollouts"), py::arg("ridge"), py::arg("seed"));
    m.def("value_at_init", &value_at_init, py::arg("pomdp"), py::arg("model"), py::arg("weights"),
          py::arg("policy"), py::arg("window_len"));
    m.def("weights_to_text", &weights_to_text, py::arg("weights"));
    m.def("weights_from_text", &weights_from_text, py::arg("text"), py::arg("name") = "<string>");
    m.def("save_weights", &save_weights, py::arg("weights"), py::arg("path"));
    m.def("load_weights", &load_weights, py::arg("path"));
    m.def(
        "verify_linear_representability",
        [](const TabularPomdp& pomdp, const WindowPolicy& policy, int window_len, int h,
           std::int64_t budget) {
            const auto r = verify_linear_representability(pomdp, policy, window_len, h, budget);
            return std::make_tuple(r.max_residual, r.mean_residual, r.n_points, r.w_fit);
        },
        py::arg("pomdp"), py::arg("policy"), py::arg("window_len"), py::arg("step"),
        py::arg("node_budget") = kDefaultNodeBudget,
        "Returns (max_residual, mean_residual, n_points, fitted weights)");

    py::class_<CovarianceAccumulator>(m, "CovarianceAccumulator")
        .def(py::init<int, double, int>(), py::arg("dim"), py::arg("lam"), py::arg("step") = 0)
        .def_static(
            "from_matrix",
            [](const std::vector<std::vector<double>>& rows, double lam, int count, int step) {
                const auto n = static_cast<Eigen::Index>(rows.size());
                Eigen::MatrixXd mat(n, n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
                        throw InvalidArgument("covariance: matrix must be square");
                    for (Eigen::Index j = 0; j < n; ++j)
                        mat(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                }
                return CovarianceAccumulator::from_matrix(std::move(mat), lam, count, step);
            },
            py::arg("matrix"), py::arg("lam"), py::arg("count"), py::arg("step") = 0)
        .def(
            "add",
            [](CovarianceAccumulator& acc, const std::vector<double>& f) {
                acc.add(Eigen::Map<const Eigen::VectorXd>(f.data(),
                                                          static_cast<Eigen::Index>(f.size())));
            },
            py::arg("feature"))
        .def_property_readonly("dim", &CovarianceAccumulator::dim)
        .def_property_readonly("count", &CovarianceAccumulator::count)
        .def_property_readonly("lam", &CovarianceAccumulator::lambda)
        .def_property_readonly("matrix",
                               [](const CovarianceAccumulator& acc) {
                                   const auto& m = acc.matrix();
                                   std::vector<std::vector<double>> rows(
                                       static_cast<std::size_t>(m.rows()),
                                       std::vector<double>(static_cast<std::size_t>(m.cols())));
                                   for (Eigen::Index i = 0; i < m.rows(); ++i)
                                       for (Eigen::Index j = 0; j < m.cols(); ++j)
                                           rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                                               m(i, j);
                                   return rows;
                               })
        .def(
            "inv_quadratic",
            [](const CovarianceAccumulator& acc, const std::vector<double>& f) {
                return acc.inv_quadratic(Eigen::Map<const Eigen::VectorXd>(
                    f.data(), static_cast<Eigen::Index>(f.size())));
            },
            py::arg("feature"));

    py::class_<BonusConfig> bonus_cfg(m, "BonusConfig");
    py::enum_<BonusConfig::Mode>(bonus_cfg, "Mode")
        .value("Optimism", BonusConfig::Mode::Optimism)
        .value("Pessimism", BonusConfig::Mode::Pessimism);
    bonus_cfg.def(py::init<>())
        .def_readwrite("alpha", &BonusConfig::alpha)
        .def_readwrite("lam", &BonusConfig::lambda)
        .def_readwrite("truncate", &BonusConfig::truncate)
        .def_readwrite("truncation_cap", &BonusConfig::truncation_cap)
        .def_readwrite("mode", &BonusConfig::mode);

    m.def(
        "bonus",
        [](const CovarianceAccumulator& acc, const std::vector<double>& f, const BonusConfig& cfg) {
            return bonus(acc,
                         Eigen::Map<const Eigen::VectorXd>(f.data(),
                                                           static_cast<Eigen::Index>(f.size())),
                         cfg);
        },
        py::arg("accumulator"), py::arg("feature"), py::arg("config"));
    m.def(
        "schedule",
        [](int k, int feature_dim, double c_alpha, double c_lambda) {
            const auto s = schedule(k, feature_dim, c_alpha, c_lambda);
            return std::make_pair(s.alpha, s.lambda);
        },
        py::arg("episode"), py::arg("feature_dim"), py::arg("c_alpha") = 1.0,
        py::arg("c_lambda") = 1.0, "Returns (alpha_k, lambda_k)");

    py::class_<AgentConfig>(m, "AgentConfig")
        .def(py::init<>())
        .def_readwrite("window_len", &AgentConfig::window_len)
        .def_readwrite("n_latent", &AgentConfig::n_latent)
        .def_readwrite("episodes", &AgentConfig::episodes)
        .def_readwrite("fit", &AgentConfig::fit)
        .def_readwrite("bonus_enabled", &AgentConfig::bonus_enabled)
        .def_readwrite("bonus", &AgentConfig::bonus)
        .def_readwrite("schedule_alpha", &AgentConfig::schedule_alpha)
        .def_readwrite("schedule_lambda", &AgentConfig::schedule_lambda)
        .def_readwrite("planner_ridge", &AgentConfig::planner_ridge)
        .def_readwrite("model_tv_diag", &AgentConfig::model_tv_diag)
        .def_readwrite("seed", &AgentConfig::seed);

    py::class_<BonusStats>(m, "BonusStats")
        .def_readonly("mean", &BonusStats::mean)
        .def_readonly("max", &BonusStats::max);

    py::class_<EpisodeLog>(m, "EpisodeLog")
        .def_readonly("episode", &EpisodeLog::episode)
        .def_readonly("ret", &EpisodeLog::ret)
        .def_readonly("planning_value", &EpisodeLog::planning_value)
        .def_readonly("model_tv", &EpisodeLog::model_tv)
        .def_readonly("bonus_by_step", &EpisodeLog::bonus_by_step);

    py::class_<OnlineResult>(m, "OnlineResult")
        .def_readonly("policies", &OnlineResult::policies)
        .def_readonly("logs", &OnlineResult::logs)
        .def_readonly("final_model", &OnlineResult::final_model)
        .def_readonly("d", &OnlineResult::d)
        .def_readonly("d_prime", &OnlineResult::d_prime);

    py::class_<OfflineDataset>(m, "OfflineDataset")
        .def(py::init<>())
        .def_readwrite("steps", &OfflineDataset::steps)
        .def_readwrite("init_obs_freq", &OfflineDataset::init_obs_freq)
        .def_readwrite("episodes", &OfflineDataset::episodes);

    py::class_<OfflineResult>(m, "OfflineResult")
        .def_readonly("policy", &OfflineResult::policy)
        .def_readonly("pessimistic_value", &OfflineResult::pessimistic_value)
        .def_readonly("model", &OfflineResult::model);

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("mean", &EvalResult::mean)
        .def_readonly("std_error", &EvalResult::std_error);

    m.def(
        "collect_rollout",
        [](const TabularPomdp& pomdp, const WindowPolicy& policy, int h, int window_len,
           std::uint64_t seed) {
            const auto r = collect_rollout(pomdp, policy, h, window_len, seed);
            return std::make_pair(r.d_record, r.d_prime);
        },
        py::arg("pomdp"), py::arg("policy"), py::arg("step"), py::arg("window_len"),
        py::arg("seed"), "Returns (record for D or None, list of (step, record) for D')");
    m.def(
        "plan",
        [](const LatentModel& model, const TabularPomdp& pomdp, int window_len,
           const std::vector<double>& init_obs_dist) {
            auto r = plan(model, pomdp, nullptr, PenaltyMode::None, window_len, init_obs_dist);
            return std::make_pair(std::move(r.policy), r.value);
        },
        py::arg("model"), py::arg("pomdp"), py::arg("window_len"), py::arg("init_obs_dist"),
        "Bonus-free exact planning; returns (policy, value)");
    m.def("run_online", &run_online, py::arg("pomdp"), py::arg("config"));
    m.def("collect_offline_dataset", &collect_offline_dataset, py::arg("pomdp"),
          py::arg("behavior"), py::arg("n_episodes"), py::arg("window_len"), py::arg("seed"));
    m.def("run_offline", &run_offline, py::arg("pomdp"), py::arg("data"), py::arg("config"));
    m.def("evaluate_policy", &evaluate_policy, py::arg("pomdp"), py::arg("policy"),
          py::arg("n_episodes"), py::arg("seed"));
    m.def("exact_policy_value", &exact_policy_value, py::arg("pomdp"), py::arg("policy"),
          py::arg("window_len"));
}
