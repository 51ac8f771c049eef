#include "winpomdp/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "winpomdp/oracle.hpp"
#include "winpomdp/textio.hpp"

namespace winpomdp::bench {

TabularPomdp FixtureSpec::build(int window_len) const {
    if (name == "FLIP") return flip_pomdp(eta, horizon > 0 ? horizon : 2);
    if (name == "LOCK")
        return lock_pomdp(window_len, code_length, horizon > 0 ? horizon : -1, lock_actions);
    if (name == "GRIDMASK") return gridmask_pomdp(grid_size, horizon > 0 ? horizon : 6);
    if (name == "file") {
        TabularPomdp p = load_pomdp(path);
        if (horizon > 0) p.horizon = horizon;
        return p;
    }
    throw InvalidArgument("unknown fixture '" + name + "'");
}

std::string FixtureSpec::describe() const {
    if (name == "FLIP") return "FLIP(eta=" + format_double(eta) + ")";
    if (name == "LOCK")
        return "LOCK(code_length=" + std::to_string(code_length) + ",actions=" + std::to_string(lock_actions) + ")";
    if (name == "GRIDMASK") return "GRIDMASK(size=" + std::to_string(grid_size) + ")";
    return "file:" + path;
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::BonusOn: return "bonus_on";
        case Variant::BonusOff: return "bonus_off";
        case Variant::UniformBaseline: return "uniform";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "bonus_on") return Variant::BonusOn;
    if (name == "bonus_off") return Variant::BonusOff;
    if (name == "uniform") return Variant::UniformBaseline;
    throw InvalidArgument("unknown variant '" + name + "'");
}

namespace {

bool parse_bool(TextReader& r) {
    std::string tok = r.next_token();
    if (tok == "true") return true;
    if (tok == "false") return false;
    r.fail("expected true/false, got '" + tok + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_text(const std::string& text, const std::string& name) {
    TextReader r = TextReader::from_string(text, name);
    r.read_header("winpomdp_config");
    ExperimentConfig cfg;
    std::set<std::string> seen;
    bool have_seeds = false;
    bool have_variants = false;
    while (!r.eof()) {
        std::string key = r.next_token();
        if (!seen.insert(key).second) r.fail("duplicate key '" + key + "'");
        if (key == "fixture") {
            cfg.fixture.name = r.next_token();
        } else if (key == "eta") {
            cfg.fixture.eta = r.next_double();
        } else if (key == "code_length") {
            cfg.fixture.code_length = static_cast<int>(r.next_int());
        } else if (key == "lock_actions") {
            cfg.fixture.lock_actions = static_cast<int>(r.next_int());
        } else if (key == "grid_size") {
            cfg.fixture.grid_size = static_cast<int>(r.next_int());
        } else if (key == "horizon") {
            cfg.fixture.horizon = static_cast<int>(r.next_int());
        } else if (key == "file") {
            cfg.fixture.path = r.next_token();
        } else if (key == "window") {
            cfg.window_len = static_cast<int>(r.next_int());
        } else if (key == "latent") {
            cfg.n_latent = static_cast<int>(r.next_int());
        } else if (key == "episodes") {
            cfg.episodes = static_cast<int>(r.next_int());
        } else if (key == "seeds") {
            const long long n = r.next_int();
            cfg.seeds.clear();
            for (long long i = 0; i < n; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(r.next_int()));
            have_seeds = true;
        } else if (key == "variants") {
            const long long n = r.next_int();
            cfg.variants.clear();
            for (long long i = 0; i < n; ++i) cfg.variants.push_back(variant_from_name(r.next_token()));
            have_variants = true;
        } else if (key == "outdir") {
            cfg.outdir = r.next_token();
        } else if (key == "fit_max_iters") {
            cfg.fit.max_iters = static_cast<int>(r.next_int());
        } else if (key == "fit_tol") {
            cfg.fit.tol = r.next_double();
        } else if (key == "fit_floor") {
            cfg.fit.floor_prob = r.next_double();
        } else if (key == "schedule_alpha") {
            cfg.schedule_alpha = r.next_double();
        } else if (key == "schedule_lambda") {
            cfg.schedule_lambda = r.next_double();
        } else if (key == "bonus_cap") {
            cfg.bonus_cap = r.next_double();
        } else if (key == "bonus_truncate") {
            cfg.bonus_truncate = parse_bool(r);
        } else if (key == "planner_ridge") {
            cfg.planner_ridge = r.next_double();
        } else if (key == "model_tv_diag") {
            cfg.model_tv_diag = parse_bool(r);
        } else if (key == "timings") {
            cfg.timings = parse_bool(r);
        } else {
            r.fail("unknown key '" + key + "'");
        }
    }
    if (!have_seeds || !have_variants || seen.count("fixture") == 0)
        throw ParseError(name + ": config requires fixture, seeds and variants");
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    return from_text(read_file(path), path.string());
}

std::string ExperimentConfig::to_text() const {
    TextWriter w;
    w.keyword("winpomdp_config");
    w.keyword("v1");
    w.endl();
    w.keyword("fixture");
    w.value(fixture.name);
    w.endl();
    if (fixture.name == "FLIP") {
        w.keyword("eta");
        w.value(fixture.eta);
        w.endl();
    } else if (fixture.name == "LOCK") {
        w.keyword("code_length");
        w.value(fixture.code_length);
        w.endl();
        w.keyword("lock_actions");
        w.value(fixture.lock_actions);
        w.endl();
    } else if (fixture.name == "GRIDMASK") {
        w.keyword("grid_size");
        w.value(fixture.grid_size);
        w.endl();
    } else if (fixture.name == "file") {
        w.keyword("file");
        w.value(fixture.path);
        w.endl();
    }
    if (fixture.horizon > 0) {
        w.keyword("horizon");
        w.value(fixture.horizon);
        w.endl();
    }
    w.keyword("window");
    w.value(window_len);
    w.endl();
    w.keyword("latent");
    w.value(n_latent);
    w.endl();
    w.keyword("episodes");
    w.value(episodes);
    w.endl();
    w.keyword("seeds");
    w.value(static_cast<long long>(seeds.size()));
    for (auto s : seeds) w.value(static_cast<long long>(s));
    w.endl();
    w.keyword("variants");
    w.value(static_cast<long long>(variants.size()));
    for (auto v : variants) w.value(variant_name(v));
    w.endl();
    if (!outdir.empty()) {
        w.keyword("outdir");
        w.value(outdir);
        w.endl();
    }
    w.keyword("fit_max_iters");
    w.value(fit.max_iters);
    w.endl();
    w.keyword("fit_tol");
    w.value(fit.tol);
    w.endl();
    w.keyword("fit_floor");
    w.value(fit.floor_prob);
    w.endl();
    w.keyword("schedule_alpha");
    w.value(schedule_alpha);
    w.endl();
    w.keyword("schedule_lambda");
    w.value(schedule_lambda);
    w.endl();
    w.keyword("bonus_cap");
    w.value(bonus_cap);
    w.endl();
    w.keyword("bonus_truncate");
    w.value(std::string(bonus_truncate ? "true" : "false"));
    w.endl();
    w.keyword("planner_ridge");
    w.value(planner_ridge);
    w.endl();
    w.keyword("model_tv_diag");
    w.value(std::string(model_tv_diag ? "true" : "false"));
    w.endl();
    w.keyword("timings");
    w.value(std::string(timings ? "true" : "false"));
    w.endl();
    return w.str();
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw InvalidArgument("config: need at least one seed");
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) throw InvalidArgument("config: seeds must be distinct");
    if (variants.empty()) throw InvalidArgument("config: need at least one variant");
    if (episodes < 1) throw InvalidArgument("config: episodes must be at least 1");
    if (window_len < 1) throw InvalidArgument("config: window must be at least 1");
    // Resolves the fixture now so unknown names fail at parse time.
    (void)fixture.build(window_len);
}

AgentConfig ExperimentConfig::agent_config(std::uint64_t seed, bool bonus_enabled) const {
    AgentConfig a;
    a.window_len = window_len;
    a.n_latent = n_latent;
    a.episodes = episodes;
    a.fit = fit;
    a.bonus_enabled = bonus_enabled;
    a.bonus.truncate = bonus_truncate;
    a.bonus.truncation_cap = bonus_cap;
    a.schedule_alpha = schedule_alpha;
    a.schedule_lambda = schedule_lambda;
    a.planner_ridge = planner_ridge;
    a.model_tv_diag = model_tv_diag;
    a.seed = seed;
    return a;
}

namespace {

constexpr const char* kMetricsHeader = "# winpomdp_metrics v1";
constexpr const char* kMetricsColumns =
    "run_id,episode,return,planning_value,model_tv,mean_bonus,wall_clock_ms";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::string out = std::string(kMetricsHeader) + "\n" + kMetricsColumns + "\n";
    for (const auto& r : rows) {
        out += r.run_id + "," + std::to_string(r.episode) + "," + format_double(r.ret) + "," +
               format_double(r.planning_value) + "," +
               (r.model_tv.has_value() ? format_double(*r.model_tv) : std::string()) + "," +
               format_double(r.mean_bonus) + "," + std::to_string(r.wall_clock_ms) + "\n";
    }
    return out;
}

std::vector<MetricsRow> metrics_from_csv(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw ParseError(name + ": unknown metrics schema/version");
    if (!std::getline(in, line) || line != kMetricsColumns)
        throw ParseError(name + ": unexpected metrics columns");
    std::vector<MetricsRow> rows;
    int line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 7)
            throw ParseError(name + ":" + std::to_string(line_no) + ": expected 7 columns");
        MetricsRow r;
        r.run_id = cells[0];
        r.episode = std::stoi(cells[1]);
        r.ret = std::stod(cells[2]);
        r.planning_value = std::stod(cells[3]);
        if (!cells[4].empty()) r.model_tv = std::stod(cells[4]);
        r.mean_bonus = std::stod(cells[5]);
        r.wall_clock_ms = std::stoll(cells[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

WindowPolicy make_named_policy(const std::string& spec, const TabularPomdp& pomdp,
                               int window_len) {
    if (spec == "uniform") return WindowPolicy::uniform(pomdp.n_actions, pomdp.horizon);
    if (spec.rfind("const:", 0) == 0)
        return WindowPolicy::constant(std::stoi(spec.substr(6)), pomdp.n_actions, pomdp.horizon);
    if (spec.rfind("random:", 0) == 0)
        return WindowPolicy::random_deterministic(pomdp, window_len,
                                                  static_cast<std::uint64_t>(std::stoull(spec.substr(7))));
    throw InvalidArgument("unknown policy spec '" + spec + "' (use uniform, const:<a>, random:<seed>)");
}

std::filesystem::path resolve_outdir(const std::optional<std::string>& flag_value,
                                     const std::string& config_value) {
    if (flag_value.has_value() && !flag_value->empty()) return *flag_value;
    if (!config_value.empty()) return config_value;
    if (const char* env = std::getenv("WINPOMDP_OUT"); env != nullptr && env[0] != '\0') return env;
    return "winpomdp_out";
}

namespace {

struct RunOutput {
    std::string run_id;
    std::string dir_name;
    std::vector<MetricsRow> metrics;
    std::string policy_text;
    std::string model_text;
    std::string bonus_trace_csv;
};

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quartile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double idx = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

RunOutput execute_run(const ExperimentConfig& cfg, const TabularPomdp& pomdp, Variant variant,
                      std::uint64_t seed) {
    RunOutput out;
    out.run_id = variant_name(variant) + ":" + std::to_string(seed);
    out.dir_name = variant_name(variant) + "_s" + std::to_string(seed);
    const auto start = std::chrono::steady_clock::now();
    if (variant == Variant::UniformBaseline) {
        const WindowPolicy uniform = WindowPolicy::uniform(pomdp.n_actions, pomdp.horizon);
        const double value = exact_policy_value(pomdp, uniform, cfg.window_len);
        for (int k = 1; k <= cfg.episodes; ++k) {
            MetricsRow row;
            row.run_id = out.run_id;
            row.episode = k;
            row.ret = value;
            row.planning_value = value;
            out.metrics.push_back(row);
        }
        out.policy_text = uniform.to_text();
        out.bonus_trace_csv = "# winpomdp_bonus_trace v1\nepisode,step,mean_bonus,max_bonus\n";
    } else {
        const OnlineResult result = run_online(pomdp, cfg.agent_config(seed, variant == Variant::BonusOn));
        std::string trace = "# winpomdp_bonus_trace v1\nepisode,step,mean_bonus,max_bonus\n";
        for (const auto& log : result.logs) {
            MetricsRow row;
            row.run_id = out.run_id;
            row.episode = log.episode;
            row.ret = log.ret;
            row.planning_value = log.planning_value;
            row.model_tv = log.model_tv;
            double mean_bonus = 0.0;
            for (std::size_t h = 0; h < log.bonus_by_step.size(); ++h) {
                mean_bonus += log.bonus_by_step[h].mean;
                trace += std::to_string(log.episode) + "," + std::to_string(h) + "," +
                         format_double(log.bonus_by_step[h].mean) + "," +
                         format_double(log.bonus_by_step[h].max) + "\n";
            }
            if (!log.bonus_by_step.empty()) mean_bonus /= static_cast<double>(log.bonus_by_step.size());
            row.mean_bonus = mean_bonus;
            out.metrics.push_back(row);
        }
        out.policy_text = result.policies.back().to_text();
        out.model_text = result.final_model.to_text();
        out.bonus_trace_csv = std::move(trace);
    }
    if (cfg.timings) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
        for (auto& row : out.metrics) row.wall_clock_ms = ms;
    }
    return out;
}

}  // namespace

int cmd_run(const std::filesystem::path& config_path, const CliOverrides& overrides) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::load(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    if (overrides.seed_override.has_value()) cfg.seeds = {*overrides.seed_override};
    const std::filesystem::path outdir = resolve_outdir(overrides.outdir, cfg.outdir);
    const TabularPomdp pomdp = cfg.fixture.build(cfg.window_len);

    struct RunSpec {
        Variant variant;
        std::uint64_t seed;
    };
    std::vector<RunSpec> runs;
    for (Variant v : cfg.variants)
        for (std::uint64_t s : cfg.seeds) runs.push_back({v, s});

    std::vector<RunOutput> outputs(runs.size());
    std::vector<std::string> errors(runs.size());
    std::atomic<std::size_t> next{0};
    const unsigned n_workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(runs.size())));
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < runs.size(); i = next.fetch_add(1)) {
                try {
                    outputs[i] = execute_run(cfg, pomdp, runs[i].variant, runs[i].seed);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "run failed (" << variant_name(runs[i].variant) << ":" << runs[i].seed
                      << "): " << errors[i] << "\n";
            return 1;
        }
    }

    // Single-threaded merge and artifact writing in run order.
    std::vector<MetricsRow> merged;
    for (const auto& out : outputs) {
        const auto run_dir = outdir / "runs" / out.dir_name;
        write_file(run_dir / "config_snapshot.txt", cfg.to_text());
        write_file(run_dir / "episodes.csv", metrics_to_csv(out.metrics));
        write_file(run_dir / "policy.txt", out.policy_text);
        if (!out.model_text.empty()) write_file(run_dir / "model.txt", out.model_text);
        write_file(run_dir / "bonus_trace.csv", out.bonus_trace_csv);
        merged.insert(merged.end(), out.metrics.begin(), out.metrics.end());
    }
    write_file(outdir / "metrics.csv", metrics_to_csv(merged));

    std::string summary = "variant  runs  median_final_return  iqr_final  median_cumulative  iqr_cumulative\n";
    for (Variant v : cfg.variants) {
        std::vector<double> finals;
        std::vector<double> cumulative;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (runs[i].variant != v) continue;
            finals.push_back(outputs[i].metrics.back().ret);
            double cum = 0.0;
            for (const auto& row : outputs[i].metrics) cum += row.ret;
            cumulative.push_back(cum);
        }
        summary += variant_name(v) + "  " + std::to_string(finals.size()) + "  " +
                   format_double(median(finals)) + "  " +
                   format_double(quartile(finals, 0.75) - quartile(finals, 0.25)) + "  " +
                   format_double(median(cumulative)) + "  " +
                   format_double(quartile(cumulative, 0.75) - quartile(cumulative, 0.25)) + "\n";
    }
    write_file(outdir / "summary.txt", summary);
    std::cout << summary;
    return 0;
}

int cmd_verify(const FixtureSpec& fixture, int window_len,
               const std::vector<std::string>& policy_specs, bool strict,
               const std::optional<std::string>& outdir_flag, double residual_threshold) {
    TabularPomdp pomdp;
    try {
        pomdp = fixture.build(window_len);
    } catch (const std::exception& e) {
        std::cerr << "fixture error: " << e.what() << "\n";
        return 2;
    }
    const std::filesystem::path outdir = resolve_outdir(outdir_flag, "");
    const int max_depth = pomdp.horizon - 1;
    const auto gaps = decodability_gap_by_depth(pomdp, window_len, max_depth);
    const double pooled_gap = decodability_gap(pomdp, window_len, max_depth);
    std::cout << fixture.describe() << "  L=" << window_len << "  horizon=" << pomdp.horizon << "\n";
    std::cout << "decodability gap (pooled depths 0.." << max_depth << "): " << format_double(pooled_gap)
              << "\n";
    for (int h = 0; h <= max_depth; ++h)
        std::cout << "  depth " << h << " gap: " << format_double(gaps[static_cast<std::size_t>(h)]) << "\n";

    const bool decodable = pooled_gap <= 1e-9;
    bool residual_breach = false;
    for (const auto& spec : policy_specs) {
        WindowPolicy policy;
        try {
            policy = make_named_policy(spec, pomdp, window_len);
        } catch (const std::exception& e) {
            std::cerr << "policy error: " << e.what() << "\n";
            return 2;
        }
        std::cout << "policy " << spec << ":\n";
        std::string csv = "# winpomdp_residuals v1\nstep,max_residual,mean_residual,n_points\n";
        for (int h = 0; h < pomdp.horizon; ++h) {
            if (!decodable) {
                std::cout << "  step " << h << ": skipped (not decodable at L=" << window_len << ")\n";
                continue;
            }
            const auto result = verify_linear_representability(pomdp, policy, window_len, h);
            residual_breach = residual_breach || result.max_residual > residual_threshold;
            std::cout << "  step " << h << ": max residual " << format_double(result.max_residual)
                      << "  mean " << format_double(result.mean_residual) << "  points "
                      << result.n_points << "\n";
            csv += std::to_string(h) + "," + format_double(result.max_residual) + "," +
                   format_double(result.mean_residual) + "," + std::to_string(result.n_points) + "\n";
        }
        std::string tag = spec;
        for (char& c : tag)
            if (c == ':') c = '_';
        if (decodable) write_file(outdir / ("residuals_" + tag + ".csv"), csv);
    }
    if (residual_breach) {
        std::cout << "FAIL: residuals above " << format_double(residual_threshold) << "\n";
        return 1;
    }
    if (strict && !decodable) {
        std::cout << "FAIL: positive decodability gap under --strict\n";
        return 1;
    }
    std::cout << "OK\n";
    return 0;
}

int cmd_plot_data(const std::filesystem::path& metrics_path,
                  const std::optional<std::string>& outdir_flag) {
    std::vector<MetricsRow> rows;
    try {
        rows = metrics_from_csv(read_file(metrics_path), metrics_path.string());
    } catch (const std::exception& e) {
        std::cerr << "metrics error: " << e.what() << "\n";
        return 2;
    }
    const std::filesystem::path outdir = resolve_outdir(outdir_flag, "");
    // variant -> episode -> returns across runs; ordered so output is
    // independent of row order in the input.
    std::map<std::string, std::map<int, std::vector<double>>> grouped;
    for (const auto& row : rows) {
        const auto colon = row.run_id.find(':');
        const std::string variant = colon == std::string::npos ? row.run_id : row.run_id.substr(0, colon);
        grouped[variant][row.episode].push_back(row.ret);
    }
    for (auto& [variant, by_episode] : grouped) {
        std::string out = "# winpomdp_curve v1\nepisode\tmean\tstderr\n";
        for (auto& [episode, values] : by_episode) {
            std::sort(values.begin(), values.end());
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double se = 0.0;
            if (values.size() > 1) {
                double var = 0.0;
                for (double v : values) var += (v - mean) * (v - mean);
                var /= static_cast<double>(values.size() - 1);
                se = std::sqrt(var / static_cast<double>(values.size()));
            }
            out += std::to_string(episode) + "\t" + format_double(mean) + "\t" + format_double(se) + "\n";
        }
        write_file(outdir / ("curve_" + variant + ".tsv"), out);
        std::cout << "wrote " << (outdir / ("curve_" + variant + ".tsv")).string() << "\n";
    }
    return 0;
}

int cmd_fixtures() {
    std::cout << "FLIP      2 states, 2 actions (stay/flip), 2 observations; emission noise 1-eta;\n"
                 "          reward 1 on observing symbol 1. Parameters: eta (default 1.0), horizon (default 2).\n"
                 "LOCK      sequence lock; positions observed with a window-1 step lag; one action per\n"
                 "          position advances the dial, the rest fall into an absorbing dead position; the\n"
                 "          full code opens the lock (reward 1/step once observed). Parameters: code_length\n"
                 "          (default 3), lock_actions (default 4), horizon (default code+window+1).\n"
                 "GRIDMASK  ring of cells with hidden binary velocity; position observed exactly; reward 1\n"
                 "          on the last cell. Parameters: grid_size (default 4), horizon (default 6).\n"
                 "file      load a fixture from a winpomdp_pomdp v1 text file (key file <path>).\n";
    return 0;
}

}  // namespace winpomdp::bench
