#include <doctest.h>

#include <cmath>
#include <set>

#include "winpomdp/agent.hpp"
#include "winpomdp/latent.hpp"

using namespace winpomdp;

namespace {

// Two-component fixture used across the examples: encode (0.3, 0.7),
// decode rows (0.9, 0.1) and (0.2, 0.8).
LatentModel example_model() {
    LatentModel model(2, 2, 1, 1);
    model.set_decode(0, 0, {0.9, 0.1});
    model.set_decode(0, 1, {0.2, 0.8});
    model.set_encode(0, initial_window(1, 0), 0, {0.3, 0.7});
    return model;
}

TransitionDataset sample_dataset(const TabularPomdp& pomdp, int window_len, int h, int n,
                                 std::uint64_t seed) {
    TransitionDataset ds;
    ds.step = h;
    const auto uniform = WindowPolicy::uniform(pomdp.n_actions, pomdp.horizon);
    for (int i = 0; i < n; ++i) {
        const auto collected = collect_rollout(pomdp, uniform, h, window_len,
                                               derive_seed(seed, static_cast<std::uint64_t>(i)));
        if (collected.d_record.has_value())
            ds.records.push_back(*collected.d_record);
        else
            ds.records.push_back(collected.d_prime.front().second);
    }
    return ds;
}

LatentModel random_model(int m, int n_obs, int n_actions, std::uint64_t seed) {
    Rng rng(seed);
    LatentModel model(m, n_obs, 1, 1);
    for (int z = 0; z < m; ++z)
        model.set_decode(0, z, floored_distribution(rng.dirichlet_uniform(n_obs), 1e-6));
    for (int o = 0; o < n_obs; ++o)
        for (int a = 0; a < n_actions; ++a)
            model.set_encode(0, initial_window(1, o), a,
                             floored_distribution(rng.dirichlet_uniform(m), 1e-6));
    return model;
}

double kl(std::span<const double> p, std::span<const double> q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) acc += p[i] * std::log(p[i] / q[i]);
    return acc;
}

}  // namespace

TEST_CASE("predicted_obs_prob") {
    SUBCASE("single latent returns its decode row") {
        LatentModel model(1, 3, 1, 1);
        model.set_decode(0, 0, {0.2, 0.3, 0.5});
        const auto d = predicted_obs_prob(model, 0, initial_window(1, 0), 0);
        CHECK(d == std::vector<double>{0.2, 0.3, 0.5});
    }
    SUBCASE("Dirac encode selects one decode row") {
        LatentModel model(2, 2, 1, 1);
        model.set_decode(0, 0, {0.9, 0.1});
        model.set_decode(0, 1, {0.2, 0.8});
        model.set_encode(0, initial_window(1, 0), 0, {0.0, 1.0});
        const auto d = predicted_obs_prob(model, 0, initial_window(1, 0), 0);
        CHECK(d[0] == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(d[1] == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("two-component mixture") {
        const auto model = example_model();
        const auto d = predicted_obs_prob(model, 0, initial_window(1, 0), 0);
        CHECK(d[0] == doctest::Approx(0.41).epsilon(1e-12));
        CHECK(d[1] == doctest::Approx(0.59).epsilon(1e-12));
    }
    SUBCASE("unseen pairs fall back to the uniform mixture") {
        const auto model = example_model();
        bool seen = true;
        const auto enc = model.encode(0, initial_window(1, 1), 1, &seen);
        CHECK_FALSE(seen);
        CHECK(enc == std::vector<double>{0.5, 0.5});
    }
}

TEST_CASE("exact_posterior") {
    SUBCASE("Bayes rule on the mixture") {
        const auto post = exact_posterior(example_model(), 0, initial_window(1, 0), 0, 0);
        CHECK(post[0] == doctest::Approx(0.27 / 0.41).epsilon(1e-12));
        CHECK(post[1] == doctest::Approx(0.14 / 0.41).epsilon(1e-12));
    }
    SUBCASE("identical decode rows leave the prior unchanged") {
        LatentModel model(2, 2, 1, 1);
        model.set_decode(0, 0, {0.6, 0.4});
        model.set_decode(0, 1, {0.6, 0.4});
        model.set_encode(0, initial_window(1, 0), 0, {0.3, 0.7});
        const auto post = exact_posterior(model, 0, initial_window(1, 0), 0, 1);
        CHECK(post[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(post[1] == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("single latent") {
        LatentModel model(1, 2, 1, 1);
        model.set_decode(0, 0, {0.5, 0.5});
        CHECK(exact_posterior(model, 0, initial_window(1, 0), 0, 1) == std::vector<double>{1.0});
    }
    SUBCASE("zero-probability observation") {
        LatentModel model(2, 2, 1, 1);
        model.set_decode(0, 0, {1.0, 0.0});
        model.set_decode(0, 1, {1.0, 0.0});
        CHECK_THROWS_AS(exact_posterior(model, 0, initial_window(1, 0), 0, 1),
                        ZeroProbabilityObservation);
    }
}

TEST_CASE("posterior consistency: Bayes numerators recompose the marginal") {
    const auto model = random_model(4, 3, 2, 21);
    for (int o = 0; o < 3; ++o) {
        const Window x = initial_window(1, o);
        for (int a = 0; a < 2; ++a) {
            const auto enc = model.encode(0, x, a);
            const auto marg = predicted_obs_prob(model, 0, x, a);
            for (int o_next = 0; o_next < 3; ++o_next) {
                const auto post = exact_posterior(model, 0, x, a, o_next);
                for (int z = 0; z < 4; ++z) {
                    const double lhs = post[static_cast<std::size_t>(z)] * marg[static_cast<std::size_t>(o_next)];
                    const double rhs = enc[static_cast<std::size_t>(z)] *
                                       model.decode_row(0, z)[static_cast<std::size_t>(o_next)];
                    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("elbo") {
    const auto model = example_model();
    const Window x = initial_window(1, 0);
    SUBCASE("exact posterior attains the log marginal") {
        for (int o = 0; o < 2; ++o) {
            const auto post = exact_posterior(model, 0, x, 0, o);
            const double bound = elbo(model, post, 0, x, 0, o);
            const double log_marg = std::log(predicted_obs_prob(model, 0, x, 0)[static_cast<std::size_t>(o)]);
            CHECK(std::abs(bound - log_marg) < 1e-10);
        }
    }
    SUBCASE("single latent ignores q") {
        LatentModel m1(1, 2, 1, 1);
        m1.set_decode(0, 0, {0.3, 0.7});
        const std::vector<double> q{1.0};
        CHECK(elbo(m1, q, 0, x, 0, 1) == doctest::Approx(std::log(0.7)).epsilon(1e-12));
    }
    SUBCASE("prior q pays exactly the KL gap to the posterior") {
        const auto enc = model.encode(0, x, 0);
        const int o = 0;
        const double bound = elbo(model, enc, 0, x, 0, o);
        double expected = 0.0;
        for (int z = 0; z < 2; ++z)
            expected += enc[static_cast<std::size_t>(z)] *
                        std::log(model.decode_row(0, z)[static_cast<std::size_t>(o)]);
        CHECK(bound == doctest::Approx(expected).epsilon(1e-12));
        const double log_marg = std::log(predicted_obs_prob(model, 0, x, 0)[static_cast<std::size_t>(o)]);
        const auto post = exact_posterior(model, 0, x, 0, o);
        CHECK(log_marg - bound == doctest::Approx(kl(enc, post)).epsilon(1e-9));
    }
    SUBCASE("bound holds for random q and is strict away from the posterior") {
        Rng rng(33);
        for (int trial = 0; trial < 500; ++trial) {
            const auto m = random_model(3, 2, 2, derive_seed(100, static_cast<std::uint64_t>(trial)));
            const auto q = rng.dirichlet_uniform(3);
            const int o = static_cast<int>(rng.next_u64() % 2);
            const int a = static_cast<int>(rng.next_u64() % 2);
            const Window w = initial_window(1, static_cast<int>(rng.next_u64() % 2));
            const double bound = elbo(m, q, 0, w, a, o);
            const double log_marg = std::log(predicted_obs_prob(m, 0, w, a)[static_cast<std::size_t>(o)]);
            CHECK(bound <= log_marg + 1e-10);
            const auto post = exact_posterior(m, 0, w, a, o);
            if (tv_distance(q, post) > 1e-3) CHECK(bound < log_marg - 1e-10);
        }
    }
    SUBCASE("variational posterior table round trip") {
        VariationalPosterior q;
        q.set_row(0, x, 0, 1, {0.5, 0.5});
        TransitionRecord rec{x, 0, 1};
        CHECK(elbo(model, q, 0, rec) == doctest::Approx(elbo(model, std::vector<double>{0.5, 0.5}, 0, x, 0, 1)));
    }
}

TEST_CASE("floored_distribution") {
    SUBCASE("keeps exact frequencies when above the floor") {
        const auto p = floored_distribution(std::vector<double>{3.0, 1.0}, 1e-6);
        CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("raises zeros exactly to the floor") {
        const auto p = floored_distribution(std::vector<double>{1.0, 0.0, 0.0}, 1e-4);
        CHECK(p[1] == doctest::Approx(1e-4).epsilon(1e-15));
        CHECK(p[2] == doctest::Approx(1e-4).epsilon(1e-15));
        CHECK(p[0] == doctest::Approx(1.0 - 2e-4).epsilon(1e-12));
        double total = 0.0;
        for (double v : p) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("all-zero weights give the uniform row") {
        const auto p = floored_distribution(std::vector<double>{0.0, 0.0}, 1e-6);
        CHECK(p == std::vector<double>{0.5, 0.5});
    }
}

TEST_CASE("fit_mle closed form with one latent") {
    const auto p = flip_pomdp(0.7, 2);
    std::vector<TransitionDataset> data{sample_dataset(p, 1, 0, 2000, 5)};
    FitConfig cfg;
    cfg.seed = 7;
    cfg.n_obs = 2;
    const auto model = fit_mle(data, 1, cfg);
    double count1 = 0.0;
    for (const auto& rec : data[0].records) count1 += rec.next_obs == 1 ? 1.0 : 0.0;
    const double freq1 = count1 / static_cast<double>(data[0].records.size());
    const auto& dec = model.decode_row(0, 0);
    CHECK(dec[1] == doctest::Approx(freq1).epsilon(1e-12));
    CHECK(dec[0] == doctest::Approx(1.0 - freq1).epsilon(1e-12));
}

TEST_CASE("fit_mle recovers the deterministic flip dynamics") {
    const auto p = flip_pomdp(1.0, 2);
    std::vector<TransitionDataset> data;
    for (int h = 0; h < 2; ++h) data.push_back(sample_dataset(p, 1, h, 5000, 17));
    FitConfig cfg;
    cfg.seed = 3;
    cfg.n_obs = 2;
    const auto model = fit_mle(data, 2, cfg);
    for (int h = 0; h < 2; ++h) {
        std::set<std::pair<int, int>> seen;
        for (const auto& rec : data[static_cast<std::size_t>(h)].records)
            seen.insert({rec.window.current_obs(), rec.action});
        for (const auto& [o, a] : seen) {
            const Window x = initial_window(1, o);
            const auto truth = obs_prob(p, belief_init(p, o), a);
            const auto pred = predicted_obs_prob(model, h, x, a);
            CHECK(tv_distance(truth, pred) <= 0.05);
        }
    }
}

TEST_CASE("fit_mle is bitwise deterministic given the seed") {
    const auto p = flip_pomdp(0.8, 2);
    std::vector<TransitionDataset> data{sample_dataset(p, 1, 0, 500, 9)};
    FitConfig cfg;
    cfg.seed = 11;
    cfg.n_obs = 2;
    const auto a = fit_mle(data, 2, cfg);
    const auto b = fit_mle(data, 2, cfg);
    CHECK(a.to_text() == b.to_text());
}

TEST_CASE("EM log-likelihood is nondecreasing") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto p = flip_pomdp(0.65, 3);
        std::vector<TransitionDataset> data;
        for (int h = 0; h < 3; ++h) data.push_back(sample_dataset(p, 1, h, 400, derive_seed(50, seed, h)));
        FitConfig cfg;
        cfg.seed = seed;
        cfg.n_obs = 2;
        const auto result = fit_mle_detailed(data, 2, cfg);
        for (const auto& trace : result.ll_trace) {
            for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
        }
    }
}

TEST_CASE("fit_mle rejects empty datasets") {
    std::vector<TransitionDataset> data(1);
    data[0].step = 0;
    CHECK_THROWS_AS(fit_mle(data, 2, FitConfig{}), EmptyDataset);
    CHECK_THROWS_AS(fit_mle({}, 2, FitConfig{}), EmptyDataset);
}

TEST_CASE("latent permutation leaves the observation mixture unchanged") {
    const auto model = random_model(4, 3, 2, 77);
    LatentModel permuted(4, 3, 1, 1);
    const std::vector<int> perm{2, 0, 3, 1};
    for (int z = 0; z < 4; ++z) permuted.set_decode(0, perm[static_cast<std::size_t>(z)], model.decode_row(0, z));
    for (int o = 0; o < 3; ++o) {
        const Window x = initial_window(1, o);
        for (int a = 0; a < 2; ++a) {
            const auto enc = model.encode(0, x, a);
            std::vector<double> penc(4);
            for (int z = 0; z < 4; ++z) penc[static_cast<std::size_t>(perm[static_cast<std::size_t>(z)])] = enc[static_cast<std::size_t>(z)];
            permuted.set_encode(0, x, a, penc);
        }
    }
    for (int o = 0; o < 3; ++o) {
        const Window x = initial_window(1, o);
        for (int a = 0; a < 2; ++a) {
            const auto d1 = predicted_obs_prob(model, 0, x, a);
            const auto d2 = predicted_obs_prob(permuted, 0, x, a);
            for (int k = 0; k < 3; ++k)
                CHECK(d1[static_cast<std::size_t>(k)] == doctest::Approx(d2[static_cast<std::size_t>(k)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("exact factorization reproduces the observation dynamics exactly") {
    struct Case {
        TabularPomdp pomdp;
        int window_len;
    };
    std::vector<Case> cases;
    cases.push_back({flip_pomdp(1.0, 3), 1});
    cases.push_back({flip_pomdp(0.8, 3), 1});  // mixture beliefs still match the marginals
    cases.push_back({lock_pomdp(2, 3), 2});
    cases.push_back({gridmask_pomdp(4, 5), 2});
    for (const auto& c : cases) {
        const auto model = exact_latent_model(c.pomdp, c.window_len);
        const auto oracle = window_belief_oracle(c.pomdp, c.window_len, c.pomdp.horizon - 1);
        for (int h = 0; h < c.pomdp.horizon; ++h) {
            for (const auto& [x, entry] : oracle.by_step[static_cast<std::size_t>(h)]) {
                for (int a = 0; a < c.pomdp.n_actions; ++a) {
                    const auto truth = obs_prob(c.pomdp, entry.mixture_belief, a);
                    const auto pred = predicted_obs_prob(model, h, x, a);
                    CHECK(tv_distance(truth, pred) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("model_tv_error") {
    SUBCASE("exact factorization has zero error") {
        const auto p = lock_pomdp(2, 3);
        const auto model = exact_latent_model(p, 2);
        for (int h = 0; h < p.horizon; ++h) {
            const auto w = uniform_reach_weighting(p, 2, h);
            CHECK(model_tv_error(model, p, 2, h, w) < 1e-9);
        }
    }
    SUBCASE("uniform-decode model on the deterministic flip pays full L1") {
        const auto p = flip_pomdp(1.0, 2);
        LatentModel model(2, 2, 1, p.horizon);  // decode rows default to uniform
        const auto w = uniform_reach_weighting(p, 1, 0);
        // Truth is a Dirac, prediction is (0.5, 0.5): L1 = 2 * 0.5, squared = 1.
        CHECK(model_tv_error(model, p, 1, 0, w) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("unreachable weighting entries are rejected") {
        const auto p = flip_pomdp(1.0, 2);
        const auto model = exact_latent_model(p, 1);
        std::map<std::pair<Window, int>, double> w{{{window_shift(initial_window(1, 0), 0, 0), 0}, 1.0}};
        // Window (0) is reachable; use an out-of-range observation symbol instead.
        Window bogus = initial_window(1, 7);
        std::map<std::pair<Window, int>, double> w2{{{bogus, 0}, 1.0}};
        CHECK_THROWS_AS(model_tv_error(model, p, 1, 0, w2), InvalidArgument);
    }
}

TEST_CASE("model text round trip") {
    const auto p = lock_pomdp(2, 3);
    const auto model = exact_latent_model(p, 2);
    const auto restored = LatentModel::from_text(model.to_text());
    CHECK(restored.to_text() == model.to_text());
    CHECK(restored.n_latent() == model.n_latent());
    CHECK_THROWS_AS(LatentModel::from_text("winpomdp_model v1\nlatent x\n"), ParseError);
}
