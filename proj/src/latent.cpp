#include "winpomdp/latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "winpomdp/rng.hpp"
#include "winpomdp/textio.hpp"

namespace winpomdp {

LatentModel::LatentModel(int n_latent, int n_obs, int window_len, int n_steps)
    : n_latent_(n_latent), n_obs_(n_obs), window_len_(window_len) {
    if (n_latent <= 0 || n_obs <= 0 || window_len <= 0 || n_steps <= 0)
        throw InvalidArgument("latent model: counts must be positive");
    steps_.resize(static_cast<std::size_t>(n_steps));
    for (auto& step : steps_)
        step.decode.assign(static_cast<std::size_t>(n_latent),
                           std::vector<double>(static_cast<std::size_t>(n_obs), 1.0 / n_obs));
}

std::vector<double> LatentModel::encode(int h, const Window& x, int a, bool* seen) const {
    const auto& step = steps_.at(static_cast<std::size_t>(h));
    auto it = step.row_index.find({x, a});
    if (it == step.row_index.end()) {
        if (seen != nullptr) *seen = false;
        return std::vector<double>(static_cast<std::size_t>(n_latent_), 1.0 / n_latent_);
    }
    if (seen != nullptr) *seen = true;
    return step.encode_rows[static_cast<std::size_t>(it->second)];
}

const std::vector<double>& LatentModel::decode_row(int h, int z) const {
    return steps_.at(static_cast<std::size_t>(h)).decode.at(static_cast<std::size_t>(z));
}

void LatentModel::set_encode(int h, const Window& x, int a, std::vector<double> probs) {
    if (static_cast<int>(probs.size()) != n_latent_)
        throw InvalidArgument("encode row has wrong latent dimension");
    check_distribution(probs, "encode row");
    auto& step = steps_.at(static_cast<std::size_t>(h));
    auto it = step.row_index.find({x, a});
    if (it == step.row_index.end()) {
        step.row_index.emplace(std::make_pair(x, a), static_cast<int>(step.encode_rows.size()));
        step.encode_rows.push_back(std::move(probs));
    } else {
        step.encode_rows[static_cast<std::size_t>(it->second)] = std::move(probs);
    }
}

void LatentModel::set_decode(int h, int z, std::vector<double> probs) {
    if (static_cast<int>(probs.size()) != n_obs_)
        throw InvalidArgument("decode row has wrong observation dimension");
    check_distribution(probs, "decode row");
    steps_.at(static_cast<std::size_t>(h)).decode.at(static_cast<std::size_t>(z)) = std::move(probs);
}

void LatentModel::validate() const {
    for (const auto& step : steps_) {
        for (const auto& row : step.encode_rows) check_distribution(row, "encode row");
        for (const auto& row : step.decode) check_distribution(row, "decode row");
    }
}

const std::vector<double>& VariationalPosterior::row(int h, const Window& x, int a,
                                                     int o_next) const {
    auto it = rows.find({h, x, a, o_next});
    if (it == rows.end()) throw InvalidArgument("variational posterior: missing row");
    return it->second;
}

void VariationalPosterior::set_row(int h, const Window& x, int a, int o_next,
                                   std::vector<double> probs) {
    check_distribution(probs, "variational row");
    rows[{h, x, a, o_next}] = std::move(probs);
}

std::vector<double> predicted_obs_prob(const LatentModel& model, int h, const Window& x, int a) {
    const auto enc = model.encode(h, x, a);
    std::vector<double> out(static_cast<std::size_t>(model.n_obs()), 0.0);
    for (int z = 0; z < model.n_latent(); ++z) {
        const double ez = enc[static_cast<std::size_t>(z)];
        if (ez == 0.0) continue;
        const auto& dec = model.decode_row(h, z);
        for (int o = 0; o < model.n_obs(); ++o) out[static_cast<std::size_t>(o)] += ez * dec[static_cast<std::size_t>(o)];
    }
    return out;
}

std::vector<double> exact_posterior(const LatentModel& model, int h, const Window& x, int a,
                                    int o_next) {
    const auto enc = model.encode(h, x, a);
    std::vector<double> post(static_cast<std::size_t>(model.n_latent()), 0.0);
    double z_total = 0.0;
    for (int z = 0; z < model.n_latent(); ++z) {
        post[static_cast<std::size_t>(z)] =
            enc[static_cast<std::size_t>(z)] * model.decode_row(h, z)[static_cast<std::size_t>(o_next)];
        z_total += post[static_cast<std::size_t>(z)];
    }
    if (z_total <= kNormalizerFloor)
        throw ZeroProbabilityObservation("exact_posterior: observation " + std::to_string(o_next) +
                                         " has zero predicted probability");
    for (double& v : post) v /= z_total;
    return post;
}

double elbo(const LatentModel& model, std::span<const double> q_row, int h, const Window& x, int a,
            int o_next) {
    const auto enc = model.encode(h, x, a);
    double acc = 0.0;
    for (int z = 0; z < model.n_latent(); ++z) {
        const double qz = q_row[static_cast<std::size_t>(z)];
        if (qz == 0.0) continue;
        const double dec = model.decode_row(h, z)[static_cast<std::size_t>(o_next)];
        const double pz = enc[static_cast<std::size_t>(z)];
        if (dec <= 0.0 || pz <= 0.0) return -std::numeric_limits<double>::infinity();
        acc += qz * (std::log(dec) - std::log(qz / pz));
    }
    return acc;
}

double elbo(const LatentModel& model, const VariationalPosterior& q, int h,
            const TransitionRecord& record) {
    return elbo(model, q.row(h, record.window, record.action, record.next_obs), h, record.window,
                record.action, record.next_obs);
}

std::vector<double> floored_distribution(std::span<const double> weights, double floor_prob) {
    const int n = static_cast<int>(weights.size());
    if (n == 0) throw InvalidArgument("floored_distribution: empty row");
    if (n == 1) return {1.0};
    if (!(floor_prob >= 0.0) || floor_prob * n >= 1.0)
        throw InvalidArgument("floored_distribution: floor too large for dimension");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw InvalidArgument("floored_distribution: negative weight");
        total += w;
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    if (total <= 0.0) {
        std::fill(out.begin(), out.end(), 1.0 / n);
        return out;
    }
    // Water-filling: p_i = max(floor, w_i / lambda). The floored set only
    // grows as lambda is rebalanced, so this terminates in <= n rounds.
    std::vector<bool> floored(static_cast<std::size_t>(n), false);
    int n_floored = 0;
    double free_mass = total;
    while (true) {
        const double lambda = free_mass / (1.0 - floor_prob * n_floored);
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            if (floored[static_cast<std::size_t>(i)]) continue;
            if (weights[static_cast<std::size_t>(i)] < floor_prob * lambda) {
                floored[static_cast<std::size_t>(i)] = true;
                ++n_floored;
                free_mass -= weights[static_cast<std::size_t>(i)];
                changed = true;
            }
        }
        if (!changed) {
            for (int i = 0; i < n; ++i)
                out[static_cast<std::size_t>(i)] = floored[static_cast<std::size_t>(i)]
                                                       ? floor_prob
                                                       : weights[static_cast<std::size_t>(i)] / lambda;
            return out;
        }
    }
}

namespace {

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

struct StepFit {
    LatentModel::StepModel step;
    std::vector<double> ll_trace;
    int iterations = 0;
};

StepFit fit_step(const TransitionDataset& dataset, int n_latent, int n_obs,
                 const FitConfig& cfg, std::uint64_t seed) {
    if (dataset.records.empty()) throw EmptyDataset("fit_mle: empty dataset at step " +
                                                    std::to_string(dataset.step));
    // Group records by (window, action) row and collapse identical
    // (row, next obs) pairs into counts; posteriors only depend on those.
    LatentModel::StepModel step;
    std::map<std::pair<int, int>, double> counts;
    std::vector<double> row_totals;
    const int window_len = dataset.records.front().window.window_len();
    for (const auto& rec : dataset.records) {
        if (rec.window.window_len() != window_len)
            throw InvalidArgument("fit_mle: inconsistent window lengths in dataset");
        auto [it, inserted] =
            step.row_index.emplace(std::make_pair(rec.window, rec.action),
                                   static_cast<int>(step.row_index.size()));
        if (inserted) row_totals.push_back(0.0);
        counts[{it->second, rec.next_obs}] += 1.0;
        row_totals[static_cast<std::size_t>(it->second)] += 1.0;
    }
    const int n_rows = static_cast<int>(step.row_index.size());
    std::vector<std::tuple<int, int, double>> cells;  // (row, obs, count)
    cells.reserve(counts.size());
    for (const auto& [key, c] : counts) cells.emplace_back(key.first, key.second, c);

    Rng rng(seed);
    step.encode_rows.resize(static_cast<std::size_t>(n_rows));
    for (auto& row : step.encode_rows)
        row = floored_distribution(rng.dirichlet_uniform(n_latent), cfg.floor_prob);
    step.decode.resize(static_cast<std::size_t>(n_latent));
    for (auto& row : step.decode)
        row = floored_distribution(rng.dirichlet_uniform(n_obs), cfg.floor_prob);

    StepFit result;
    std::vector<double> post(static_cast<std::size_t>(n_latent));
    std::vector<std::vector<KahanSum>> enc_acc;
    std::vector<std::vector<KahanSum>> dec_acc;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        enc_acc.assign(static_cast<std::size_t>(n_rows),
                       std::vector<KahanSum>(static_cast<std::size_t>(n_latent)));
        dec_acc.assign(static_cast<std::size_t>(n_latent),
                       std::vector<KahanSum>(static_cast<std::size_t>(n_obs)));
        KahanSum ll;
        for (const auto& [row, o, c] : cells) {
            const auto& enc = step.encode_rows[static_cast<std::size_t>(row)];
            double marginal = 0.0;
            for (int z = 0; z < n_latent; ++z) {
                post[static_cast<std::size_t>(z)] =
                    enc[static_cast<std::size_t>(z)] * step.decode[static_cast<std::size_t>(z)][static_cast<std::size_t>(o)];
                marginal += post[static_cast<std::size_t>(z)];
            }
            ll.add(c * std::log(marginal));
            for (int z = 0; z < n_latent; ++z) {
                const double w = c * post[static_cast<std::size_t>(z)] / marginal;
                enc_acc[static_cast<std::size_t>(row)][static_cast<std::size_t>(z)].add(w);
                dec_acc[static_cast<std::size_t>(z)][static_cast<std::size_t>(o)].add(w);
            }
        }
        result.ll_trace.push_back(ll.sum);
        result.iterations = iter;
        if (iter > 1 && ll.sum - result.ll_trace[result.ll_trace.size() - 2] < cfg.tol) break;
        std::vector<double> buf;
        for (int row = 0; row < n_rows; ++row) {
            buf.assign(static_cast<std::size_t>(n_latent), 0.0);
            for (int z = 0; z < n_latent; ++z) buf[static_cast<std::size_t>(z)] = enc_acc[static_cast<std::size_t>(row)][static_cast<std::size_t>(z)].sum;
            step.encode_rows[static_cast<std::size_t>(row)] = floored_distribution(buf, cfg.floor_prob);
        }
        for (int z = 0; z < n_latent; ++z) {
            buf.assign(static_cast<std::size_t>(n_obs), 0.0);
            for (int o = 0; o < n_obs; ++o) buf[static_cast<std::size_t>(o)] = dec_acc[static_cast<std::size_t>(z)][static_cast<std::size_t>(o)].sum;
            step.decode[static_cast<std::size_t>(z)] = floored_distribution(buf, cfg.floor_prob);
        }
    }
    result.step = std::move(step);
    return result;
}

}  // namespace

FitResult fit_mle_detailed(const std::vector<TransitionDataset>& datasets, int n_latent,
                           const FitConfig& config) {
    if (datasets.empty()) throw EmptyDataset("fit_mle: no datasets");
    if (n_latent <= 0) throw InvalidArgument("fit_mle: latent dimension must be positive");
    int max_step = 0;
    int n_obs = config.n_obs;
    int window_len = 0;
    for (const auto& d : datasets) {
        if (d.records.empty())
            throw EmptyDataset("fit_mle: empty dataset at step " + std::to_string(d.step));
        max_step = std::max(max_step, d.step);
        window_len = d.records.front().window.window_len();
        for (const auto& rec : d.records) n_obs = std::max(n_obs, rec.next_obs + 1);
    }
    for (const auto& d : datasets)
        for (const auto& rec : d.records)
            for (int o : rec.window.obs) n_obs = std::max(n_obs, o + 1);

    FitResult result;
    result.model = LatentModel(n_latent, n_obs, window_len, max_step + 1);
    result.ll_trace.resize(static_cast<std::size_t>(max_step) + 1);
    result.iterations.assign(static_cast<std::size_t>(max_step) + 1, 0);
    LatentModel& model = result.model;
    for (const auto& d : datasets) {
        StepFit fit = fit_step(d, n_latent, n_obs, config,
                               derive_seed(config.seed, 0xE57E9, static_cast<std::uint64_t>(d.step)));
        result.ll_trace[static_cast<std::size_t>(d.step)] = std::move(fit.ll_trace);
        result.iterations[static_cast<std::size_t>(d.step)] = fit.iterations;
        for (const auto& [key, row] : fit.step.row_index)
            model.set_encode(d.step, key.first, key.second,
                             fit.step.encode_rows[static_cast<std::size_t>(row)]);
        for (int z = 0; z < n_latent; ++z)
            model.set_decode(d.step, z, fit.step.decode[static_cast<std::size_t>(z)]);
    }
    return result;
}

LatentModel fit_mle(const std::vector<TransitionDataset>& datasets, int n_latent,
                    const FitConfig& config) {
    return fit_mle_detailed(datasets, n_latent, config).model;
}

LatentModel exact_latent_model(const TabularPomdp& pomdp, int window_len,
                               std::int64_t node_budget) {
    const auto oracle = window_belief_oracle(pomdp, window_len, pomdp.horizon - 1, node_budget);
    LatentModel model(pomdp.n_states, pomdp.n_obs, window_len, pomdp.horizon);
    for (int h = 0; h < pomdp.horizon; ++h) {
        for (int z = 0; z < pomdp.n_states; ++z) {
            const auto row = pomdp.emit_row(z);
            model.set_decode(h, z, std::vector<double>(row.begin(), row.end()));
        }
        for (const auto& [x, entry] : oracle.by_step[static_cast<std::size_t>(h)]) {
            for (int a = 0; a < pomdp.n_actions; ++a) {
                std::vector<double> enc(static_cast<std::size_t>(pomdp.n_states), 0.0);
                for (int s = 0; s < pomdp.n_states; ++s) {
                    const double bs = entry.mixture_belief.probs[static_cast<std::size_t>(s)];
                    if (bs == 0.0) continue;
                    const auto row = pomdp.trans_row(s, a);
                    for (int sn = 0; sn < pomdp.n_states; ++sn)
                        enc[static_cast<std::size_t>(sn)] += bs * row[sn];
                }
                model.set_encode(h, x, a, std::move(enc));
            }
        }
    }
    return model;
}

TvErrorReport model_tv_error_report(const LatentModel& model, const TabularPomdp& pomdp,
                                    int window_len, int h,
                                    const std::map<std::pair<Window, int>, double>& weighting,
                                    std::int64_t node_budget) {
    const auto oracle = window_belief_oracle(pomdp, window_len, h, node_budget);
    const auto& entries = oracle.by_step.at(static_cast<std::size_t>(h));
    TvErrorReport report;
    double total_weight = 0.0;
    for (const auto& [key, weight] : weighting) {
        if (weight <= 0.0) continue;
        auto it = entries.find(key.first);
        if (it == entries.end())
            throw InvalidArgument("model_tv_error: weighting references an unreachable window");
        const auto truth = obs_prob(pomdp, it->second.mixture_belief, key.second);
        const auto pred = predicted_obs_prob(model, h, key.first, key.second);
        double l1 = 0.0;
        for (int o = 0; o < pomdp.n_obs; ++o)
            l1 += std::abs(truth[static_cast<std::size_t>(o)] - pred[static_cast<std::size_t>(o)]);
        report.l1_by_pair[key] = l1;
        report.weighted_avg_sq += weight * l1 * l1;
        total_weight += weight;
    }
    if (total_weight > 0.0) report.weighted_avg_sq /= total_weight;
    return report;
}

double model_tv_error(const LatentModel& model, const TabularPomdp& pomdp, int window_len, int h,
                      const std::map<std::pair<Window, int>, double>& weighting,
                      std::int64_t node_budget) {
    return model_tv_error_report(model, pomdp, window_len, h, weighting, node_budget)
        .weighted_avg_sq;
}

std::map<std::pair<Window, int>, double> uniform_reach_weighting(const TabularPomdp& pomdp,
                                                                 int window_len, int h,
                                                                 std::int64_t node_budget) {
    const auto oracle = window_belief_oracle(pomdp, window_len, h, node_budget);
    std::map<std::pair<Window, int>, double> weighting;
    for (const auto& [x, entry] : oracle.by_step.at(static_cast<std::size_t>(h)))
        for (int a = 0; a < pomdp.n_actions; ++a)
            weighting[{x, a}] = entry.weight / pomdp.n_actions;
    return weighting;
}

std::string LatentModel::to_text() const {
    TextWriter w;
    w.keyword("winpomdp_model");
    w.keyword("v1");
    w.endl();
    w.keyword("latent");
    w.value(n_latent_);
    w.endl();
    w.keyword("observations");
    w.value(n_obs_);
    w.endl();
    w.keyword("window");
    w.value(window_len_);
    w.endl();
    w.keyword("steps");
    w.value(n_steps());
    w.endl();
    for (int h = 0; h < n_steps(); ++h) {
        const auto& step = steps_[static_cast<std::size_t>(h)];
        w.keyword("step");
        w.value(h);
        w.endl();
        w.keyword("decode");
        w.endl();
        for (const auto& row : step.decode) w.row(row);
        w.keyword("encode");
        w.value(static_cast<long long>(step.row_index.size()));
        w.endl();
        for (const auto& [key, row] : step.row_index) {
            for (int o : key.first.obs) w.value(static_cast<long long>(o));
            for (int a : key.first.acts) w.value(static_cast<long long>(a));
            w.value(static_cast<long long>(key.second));
            w.row(step.encode_rows[static_cast<std::size_t>(row)]);
        }
    }
    return w.str();
}

LatentModel LatentModel::from_text(const std::string& text, const std::string& name) {
    TextReader r = TextReader::from_string(text, name);
    r.read_header("winpomdp_model");
    r.expect("latent");
    const int m = static_cast<int>(r.next_int());
    r.expect("observations");
    const int n_obs = static_cast<int>(r.next_int());
    r.expect("window");
    const int window_len = static_cast<int>(r.next_int());
    r.expect("steps");
    const int n_steps = static_cast<int>(r.next_int());
    LatentModel model(m, n_obs, window_len, n_steps);
    for (int h = 0; h < n_steps; ++h) {
        r.expect("step");
        if (r.next_int() != h) r.fail("model steps out of order");
        r.expect("decode");
        for (int z = 0; z < m; ++z) model.set_decode(h, z, r.next_doubles(n_obs));
        r.expect("encode");
        const long long n_rows = r.next_int();
        for (long long i = 0; i < n_rows; ++i) {
            Window x;
            x.obs.resize(static_cast<std::size_t>(window_len));
            x.acts.resize(static_cast<std::size_t>(window_len - 1));
            for (int& o : x.obs) o = static_cast<int>(r.next_int());
            for (int& a : x.acts) a = static_cast<int>(r.next_int());
            const int action = static_cast<int>(r.next_int());
            model.set_encode(h, x, action, r.next_doubles(m));
        }
    }
    return model;
}

void LatentModel::save(const std::filesystem::path& path) const { write_file(path, to_text()); }

LatentModel LatentModel::load(const std::filesystem::path& path) {
    return from_text(read_file(path), path.string());
}

}  // namespace winpomdp
