#include "winpomdp/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "winpomdp/textio.hpp"

namespace winpomdp {

bool is_distribution(std::span<const double> p, double tol) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
        total += v;
    }
    return std::abs(total - 1.0) <= tol;
}

void check_distribution(std::span<const double> p, const std::string& what, double tol) {
    if (!is_distribution(p, tol)) {
        double total = std::accumulate(p.begin(), p.end(), 0.0);
        throw InvalidArgument(what + " is not a probability distribution (sum=" +
                              format_double(total) + ")");
    }
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

void TabularPomdp::validate() const {
    if (n_states <= 0 || n_actions <= 0 || n_obs <= 0 || horizon <= 0)
        throw InvalidArgument("pomdp counts and horizon must be positive");
    if (rho0.size() != static_cast<std::size_t>(n_states) ||
        trans.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
        emit.size() != static_cast<std::size_t>(n_states) * n_obs ||
        reward.size() != static_cast<std::size_t>(n_obs) * n_actions)
        throw InvalidArgument("pomdp table sizes inconsistent with counts");
    check_distribution(rho0, "rho0");
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a)
            check_distribution(trans_row(s, a),
                               "trans row (s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")");
        check_distribution(emit_row(s), "emit row (s=" + std::to_string(s) + ")");
    }
    for (double r : reward)
        if (!(r >= 0.0 && r <= 1.0))
            throw InvalidArgument("reward values must lie in [0, 1]");
}

TabularPomdp flip_pomdp(double eta, int horizon) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("flip: eta must be in [0, 1]");
    TabularPomdp p;
    p.n_states = 2;
    p.n_actions = 2;  // 0 = stay, 1 = flip
    p.n_obs = 2;
    p.horizon = horizon;
    p.rho0 = {0.5, 0.5};
    p.trans.assign(2 * 2 * 2, 0.0);
    for (int s = 0; s < 2; ++s) {
        p.trans[(s * 2 + 0) * 2 + s] = 1.0;
        p.trans[(s * 2 + 1) * 2 + (1 - s)] = 1.0;
    }
    p.emit = {eta, 1.0 - eta, 1.0 - eta, eta};
    p.reward = {0.0, 0.0, 1.0, 1.0};
    p.validate();
    return p;
}

namespace {

// Lock dial update: position labels are 0..code_length-1 (dial), code_length
// (open, absorbing), code_length+1 (dead, absorbing).
int lock_next_pos(int pos, int a, int code_length, int n_actions) {
    if (pos == code_length || pos == code_length + 1) return pos;
    const int correct = (pos + 1) % n_actions;
    return a == correct ? pos + 1 : code_length + 1;
}

}  // namespace

TabularPomdp lock_pomdp(int window_len, int code_length, int horizon, int n_actions) {
    if (window_len < 1 || code_length < 1 || n_actions < 2)
        throw InvalidArgument("lock: bad parameters");
    if (horizon < 0) horizon = code_length + window_len + 1;
    const int n_pos = code_length + 2;
    const int L = window_len;
    // State = the last L dial positions, newest first; the observation reveals
    // the oldest of them, so positions are observed with an L-1 step lag.
    int n_states = 1;
    for (int i = 0; i < L; ++i) n_states *= n_pos;
    TabularPomdp p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.n_obs = n_pos;
    p.horizon = horizon;

    auto components = [&](int s) {
        std::vector<int> c(static_cast<std::size_t>(L));
        for (int i = L - 1; i >= 0; --i) {
            c[static_cast<std::size_t>(i)] = s % n_pos;
            s /= n_pos;
        }
        return c;  // c[0] = newest position
    };
    auto index_of = [&](const std::vector<int>& c) {
        int s = 0;
        for (int v : c) s = s * n_pos + v;
        return s;
    };

    p.rho0.assign(static_cast<std::size_t>(n_states), 0.0);
    p.rho0[static_cast<std::size_t>(index_of(std::vector<int>(static_cast<std::size_t>(L), 0)))] = 1.0;

    p.trans.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    p.emit.assign(static_cast<std::size_t>(n_states) * n_pos, 0.0);
    for (int s = 0; s < n_states; ++s) {
        const auto c = components(s);
        p.emit[static_cast<std::size_t>(s) * n_pos + c.back()] = 1.0;
        for (int a = 0; a < n_actions; ++a) {
            std::vector<int> nc(static_cast<std::size_t>(L));
            nc[0] = lock_next_pos(c[0], a, code_length, n_actions);
            for (int i = 1; i < L; ++i) nc[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i - 1)];
            p.trans[(static_cast<std::size_t>(s) * n_actions + a) * n_states + index_of(nc)] = 1.0;
        }
    }

    p.reward.assign(static_cast<std::size_t>(n_pos) * n_actions, 0.0);
    for (int a = 0; a < n_actions; ++a)
        p.reward[static_cast<std::size_t>(code_length) * n_actions + a] = 1.0;
    p.validate();
    return p;
}

TabularPomdp gridmask_pomdp(int n_pos, int horizon) {
    if (n_pos < 2) throw InvalidArgument("gridmask: need at least 2 cells");
    TabularPomdp p;
    p.n_states = n_pos * 2;  // (pos, vel) with vel in {0, 1}
    p.n_actions = 2;          // 0 = keep velocity, 1 = toggle velocity
    p.n_obs = n_pos;
    p.horizon = horizon;
    p.rho0.assign(static_cast<std::size_t>(p.n_states), 1.0 / p.n_states);
    p.trans.assign(static_cast<std::size_t>(p.n_states) * 2 * p.n_states, 0.0);
    p.emit.assign(static_cast<std::size_t>(p.n_states) * n_pos, 0.0);
    for (int pos = 0; pos < n_pos; ++pos) {
        for (int vel = 0; vel < 2; ++vel) {
            const int s = pos * 2 + vel;
            p.emit[static_cast<std::size_t>(s) * n_pos + pos] = 1.0;
            for (int a = 0; a < 2; ++a) {
                const int nvel = (vel + a) % 2;
                const int npos = (pos + nvel) % n_pos;
                p.trans[(static_cast<std::size_t>(s) * 2 + a) * p.n_states + (npos * 2 + nvel)] = 1.0;
            }
        }
    }
    p.reward.assign(static_cast<std::size_t>(n_pos) * 2, 0.0);
    p.reward[static_cast<std::size_t>(n_pos - 1) * 2 + 0] = 1.0;
    p.reward[static_cast<std::size_t>(n_pos - 1) * 2 + 1] = 1.0;
    p.validate();
    return p;
}

std::string pomdp_to_text(const TabularPomdp& p) {
    TextWriter w;
    w.keyword("winpomdp_pomdp");
    w.keyword("v1");
    w.endl();
    w.keyword("states");
    w.value(p.n_states);
    w.endl();
    w.keyword("actions");
    w.value(p.n_actions);
    w.endl();
    w.keyword("observations");
    w.value(p.n_obs);
    w.endl();
    w.keyword("horizon");
    w.value(p.horizon);
    w.endl();
    w.keyword("rho0");
    w.endl();
    w.row(p.rho0);
    w.keyword("trans");
    w.endl();
    for (int s = 0; s < p.n_states; ++s)
        for (int a = 0; a < p.n_actions; ++a) w.row(p.trans_row(s, a));
    w.keyword("emit");
    w.endl();
    for (int s = 0; s < p.n_states; ++s) w.row(p.emit_row(s));
    w.keyword("reward");
    w.endl();
    for (int o = 0; o < p.n_obs; ++o)
        w.row(std::span<const double>(p.reward.data() + static_cast<std::size_t>(o) * p.n_actions,
                                      static_cast<std::size_t>(p.n_actions)));
    return w.str();
}

namespace {

TabularPomdp parse_pomdp(TextReader& r) {
    r.read_header("winpomdp_pomdp");
    TabularPomdp p;
    bool have_states = false, have_actions = false, have_obs = false, have_horizon = false;
    bool have_rho0 = false, have_trans = false, have_emit = false, have_reward = false;
    auto need_counts = [&](const std::string& key) {
        if (!(have_states && have_actions && have_obs))
            r.fail("'" + key + "' must come after states/actions/observations");
    };
    while (!r.eof()) {
        std::string key = r.next_token();
        if (key == "states") {
            p.n_states = static_cast<int>(r.next_int());
            have_states = true;
        } else if (key == "actions") {
            p.n_actions = static_cast<int>(r.next_int());
            have_actions = true;
        } else if (key == "observations") {
            p.n_obs = static_cast<int>(r.next_int());
            have_obs = true;
        } else if (key == "horizon") {
            p.horizon = static_cast<int>(r.next_int());
            have_horizon = true;
        } else if (key == "rho0") {
            need_counts(key);
            p.rho0 = r.next_doubles(p.n_states);
            have_rho0 = true;
        } else if (key == "trans") {
            need_counts(key);
            p.trans = r.next_doubles(p.n_states * p.n_actions * p.n_states);
            have_trans = true;
        } else if (key == "emit") {
            need_counts(key);
            p.emit = r.next_doubles(p.n_states * p.n_obs);
            have_emit = true;
        } else if (key == "reward") {
            need_counts(key);
            p.reward = r.next_doubles(p.n_obs * p.n_actions);
            have_reward = true;
        } else {
            r.fail("unknown key '" + key + "'");
        }
    }
    if (!(have_horizon && have_rho0 && have_trans && have_emit && have_reward))
        throw ParseError("pomdp file is missing required keys");
    p.validate();
    return p;
}

}  // namespace

TabularPomdp load_pomdp(const std::filesystem::path& path) {
    TextReader r(path);
    return parse_pomdp(r);
}

TabularPomdp pomdp_from_text(const std::string& text, const std::string& name) {
    TextReader r = TextReader::from_string(text, name);
    return parse_pomdp(r);
}

void save_pomdp(const TabularPomdp& pomdp, const std::filesystem::path& path) {
    write_file(path, pomdp_to_text(pomdp));
}

void BeliefVector::validate() const { check_distribution(probs, "belief"); }

BeliefVector belief_init(const TabularPomdp& pomdp, int o0) {
    BeliefVector b;
    b.probs.assign(static_cast<std::size_t>(pomdp.n_states), 0.0);
    double z = 0.0;
    for (int s = 0; s < pomdp.n_states; ++s) {
        b.probs[static_cast<std::size_t>(s)] = pomdp.rho0[static_cast<std::size_t>(s)] * pomdp.emit_at(s, o0);
        z += b.probs[static_cast<std::size_t>(s)];
    }
    if (z <= kNormalizerFloor)
        throw ZeroProbabilityObservation("belief_init: observation " + std::to_string(o0) +
                                         " has zero probability under rho0");
    for (double& v : b.probs) v /= z;
    return b;
}

BeliefVector belief_update(const TabularPomdp& pomdp, const BeliefVector& b, int a, int o_next) {
    BeliefVector out;
    out.probs.assign(static_cast<std::size_t>(pomdp.n_states), 0.0);
    for (int s = 0; s < pomdp.n_states; ++s) {
        const double bs = b.probs[static_cast<std::size_t>(s)];
        if (bs == 0.0) continue;
        const auto row = pomdp.trans_row(s, a);
        for (int sn = 0; sn < pomdp.n_states; ++sn) out.probs[static_cast<std::size_t>(sn)] += bs * row[sn];
    }
    double z = 0.0;
    for (int sn = 0; sn < pomdp.n_states; ++sn) {
        out.probs[static_cast<std::size_t>(sn)] *= pomdp.emit_at(sn, o_next);
        z += out.probs[static_cast<std::size_t>(sn)];
    }
    if (z <= kNormalizerFloor)
        throw ZeroProbabilityObservation("belief_update: observation " + std::to_string(o_next) +
                                         " has zero predicted probability");
    for (double& v : out.probs) v /= z;
    return out;
}

std::vector<double> obs_prob(const TabularPomdp& pomdp, const BeliefVector& b, int a) {
    std::vector<double> pushed(static_cast<std::size_t>(pomdp.n_states), 0.0);
    for (int s = 0; s < pomdp.n_states; ++s) {
        const double bs = b.probs[static_cast<std::size_t>(s)];
        if (bs == 0.0) continue;
        const auto row = pomdp.trans_row(s, a);
        for (int sn = 0; sn < pomdp.n_states; ++sn) pushed[static_cast<std::size_t>(sn)] += bs * row[sn];
    }
    std::vector<double> out(static_cast<std::size_t>(pomdp.n_obs), 0.0);
    for (int sn = 0; sn < pomdp.n_states; ++sn) {
        if (pushed[static_cast<std::size_t>(sn)] == 0.0) continue;
        const auto row = pomdp.emit_row(sn);
        for (int o = 0; o < pomdp.n_obs; ++o) out[static_cast<std::size_t>(o)] += pushed[static_cast<std::size_t>(sn)] * row[o];
    }
    return out;
}

std::vector<double> initial_obs_marginal(const TabularPomdp& pomdp) {
    std::vector<double> out(static_cast<std::size_t>(pomdp.n_obs), 0.0);
    for (int s = 0; s < pomdp.n_states; ++s) {
        const double rs = pomdp.rho0[static_cast<std::size_t>(s)];
        if (rs == 0.0) continue;
        for (int o = 0; o < pomdp.n_obs; ++o) out[static_cast<std::size_t>(o)] += rs * pomdp.emit_at(s, o);
    }
    return out;
}

int Window::pad_count() const {
    int p = 0;
    while (p < window_len() && obs[static_cast<std::size_t>(p)] == kPad) ++p;
    return p;
}

void Window::validate() const {
    if (obs.empty() || acts.size() + 1 != obs.size())
        throw InvalidArgument("window: need L observations and L-1 actions");
    if (obs.back() == kPad) throw InvalidArgument("window: latest observation missing");
    bool seen_obs = false;
    for (int o : obs) {
        if (o != kPad) seen_obs = true;
        else if (seen_obs) throw InvalidArgument("window: sentinel after a concrete observation");
    }
    bool seen_act = false;
    for (std::size_t i = 0; i < acts.size(); ++i) {
        if (acts[i] != kPad) {
            seen_act = true;
            if (obs[i] == kPad || obs[i + 1] == kPad)
                throw InvalidArgument("window: concrete action adjacent to sentinel observation");
        } else if (seen_act) {
            throw InvalidArgument("window: sentinel after a concrete action");
        }
    }
}

Window initial_window(int window_len, int o0) {
    Window x;
    x.obs.assign(static_cast<std::size_t>(window_len), kPad);
    x.obs.back() = o0;
    x.acts.assign(static_cast<std::size_t>(window_len - 1), kPad);
    return x;
}

Window window_shift(const Window& x, int a, int o_next) {
    Window out;
    out.obs.assign(x.obs.begin() + 1, x.obs.end());
    out.obs.push_back(o_next);
    if (!x.acts.empty()) {
        out.acts.assign(x.acts.begin() + 1, x.acts.end());
        out.acts.push_back(a);
    }
    return out;
}

std::vector<Window> enumerate_windows(int window_len, int n_obs, int n_actions, int pad) {
    const int n_free_obs = window_len - pad;
    const int n_free_acts = window_len - 1 - pad;
    if (n_free_obs < 1 || n_free_acts < 0)
        throw InvalidArgument("enumerate_windows: pad count out of range");
    std::vector<Window> out;
    Window x;
    x.obs.assign(static_cast<std::size_t>(window_len), kPad);
    x.acts.assign(static_cast<std::size_t>(window_len - 1), kPad);
    // Mixed-radix counter over the free slots, observation-major.
    std::vector<int> digits(static_cast<std::size_t>(n_free_obs + n_free_acts), 0);
    const auto radix = [&](int i) { return i < n_free_obs ? n_obs : n_actions; };
    while (true) {
        for (int i = 0; i < n_free_obs; ++i) x.obs[static_cast<std::size_t>(pad + i)] = digits[static_cast<std::size_t>(i)];
        for (int i = 0; i < n_free_acts; ++i)
            x.acts[static_cast<std::size_t>(pad + i)] = digits[static_cast<std::size_t>(n_free_obs + i)];
        out.push_back(x);
        int i = static_cast<int>(digits.size()) - 1;
        while (i >= 0) {
            if (++digits[static_cast<std::size_t>(i)] < radix(i)) break;
            digits[static_cast<std::size_t>(i)] = 0;
            --i;
        }
        if (i < 0) break;
    }
    return out;
}

double Trajectory::total_reward() const {
    double acc = 0.0;
    for (double r : rewards) acc += r;
    return acc;
}

WindowPolicy WindowPolicy::uniform(int n_actions, int horizon) {
    WindowPolicy p;
    p.kind_ = Kind::Uniform;
    p.n_actions_ = n_actions;
    p.horizon_ = horizon;
    return p;
}

WindowPolicy WindowPolicy::constant(int action, int n_actions, int horizon) {
    if (action < 0 || action >= n_actions) throw InvalidArgument("constant policy: bad action");
    WindowPolicy p;
    p.kind_ = Kind::Constant;
    p.n_actions_ = n_actions;
    p.horizon_ = horizon;
    p.constant_action_ = action;
    return p;
}

WindowPolicy WindowPolicy::make_table(int n_actions, int horizon, int window_len) {
    WindowPolicy p;
    p.kind_ = Kind::Table;
    p.n_actions_ = n_actions;
    p.horizon_ = horizon;
    p.window_len_ = window_len;
    p.table_.resize(static_cast<std::size_t>(horizon));
    return p;
}

WindowPolicy WindowPolicy::random_deterministic(const TabularPomdp& pomdp, int window_len,
                                                std::uint64_t seed) {
    WindowPolicy p = make_table(pomdp.n_actions, pomdp.horizon, window_len);
    Rng rng(derive_seed(seed, 0x9011C4));
    for (int h = 0; h < pomdp.horizon; ++h) {
        const int pad = pad_count_for_step(window_len, h);
        for (const Window& x : enumerate_windows(window_len, pomdp.n_obs, pomdp.n_actions, pad)) {
            std::vector<double> row(static_cast<std::size_t>(pomdp.n_actions), 0.0);
            row[static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(pomdp.n_actions))] = 1.0;
            p.set_row(h, x, std::move(row));
        }
    }
    return p;
}

std::vector<double> WindowPolicy::row(int h, const Window& x) const {
    switch (kind_) {
        case Kind::Uniform:
            return std::vector<double>(static_cast<std::size_t>(n_actions_), 1.0 / n_actions_);
        case Kind::Constant: {
            std::vector<double> r(static_cast<std::size_t>(n_actions_), 0.0);
            r[static_cast<std::size_t>(constant_action_)] = 1.0;
            return r;
        }
        case Kind::Table: {
            if (h < 0 || h >= static_cast<int>(table_.size()))
                throw InvalidArgument("policy: step out of range");
            auto it = table_[static_cast<std::size_t>(h)].find(x);
            if (it == table_[static_cast<std::size_t>(h)].end())
                throw InvalidArgument("policy: no row for window at step " + std::to_string(h));
            return it->second;
        }
    }
    throw InvalidArgument("policy: bad kind");
}

void WindowPolicy::set_row(int h, const Window& x, std::vector<double> probs) {
    if (kind_ != Kind::Table) throw InvalidArgument("policy: set_row needs a table policy");
    check_distribution(probs, "policy row");
    table_[static_cast<std::size_t>(h)][x] = std::move(probs);
}

int WindowPolicy::sample(int h, const Window& x, Rng& rng) const {
    if (kind_ == Kind::Constant) return constant_action_;
    const auto r = row(h, x);
    return rng.categorical(r);
}

int WindowPolicy::greedy(int h, const Window& x) const {
    const auto r = row(h, x);
    int best = 0;
    for (int a = 1; a < n_actions_; ++a)
        if (r[static_cast<std::size_t>(a)] > r[static_cast<std::size_t>(best)]) best = a;
    return best;
}

std::string WindowPolicy::to_text() const {
    TextWriter w;
    w.keyword("winpomdp_policy");
    w.keyword("v1");
    w.endl();
    w.keyword("actions");
    w.value(n_actions_);
    w.endl();
    w.keyword("steps");
    w.value(horizon_);
    w.endl();
    w.keyword("window");
    w.value(window_len_);
    w.endl();
    switch (kind_) {
        case Kind::Uniform:
            w.keyword("kind");
            w.keyword("uniform");
            w.endl();
            break;
        case Kind::Constant:
            w.keyword("kind");
            w.keyword("constant");
            w.value(constant_action_);
            w.endl();
            break;
        case Kind::Table:
            w.keyword("kind");
            w.keyword("table");
            w.endl();
            for (int h = 0; h < horizon_; ++h) {
                const auto& rows = table_[static_cast<std::size_t>(h)];
                w.keyword("step");
                w.value(h);
                w.keyword("rows");
                w.value(static_cast<long long>(rows.size()));
                w.endl();
                for (const auto& [x, probs] : rows) {
                    for (int o : x.obs) w.value(static_cast<long long>(o));
                    for (int a : x.acts) w.value(static_cast<long long>(a));
                    w.row(probs);
                }
            }
            break;
    }
    return w.str();
}

WindowPolicy WindowPolicy::from_text(const std::string& text, const std::string& name) {
    TextReader r = TextReader::from_string(text, name);
    r.read_header("winpomdp_policy");
    r.expect("actions");
    const int n_actions = static_cast<int>(r.next_int());
    r.expect("steps");
    const int horizon = static_cast<int>(r.next_int());
    r.expect("window");
    const int window_len = static_cast<int>(r.next_int());
    r.expect("kind");
    std::string kind = r.next_token();
    if (kind == "uniform") {
        WindowPolicy p = uniform(n_actions, horizon);
        p.window_len_ = window_len;
        return p;
    }
    if (kind == "constant") {
        WindowPolicy p = constant(static_cast<int>(r.next_int()), n_actions, horizon);
        p.window_len_ = window_len;
        return p;
    }
    if (kind != "table") r.fail("unknown policy kind '" + kind + "'");
    WindowPolicy p = make_table(n_actions, horizon, window_len);
    for (int h = 0; h < horizon; ++h) {
        r.expect("step");
        if (r.next_int() != h) r.fail("policy steps out of order");
        r.expect("rows");
        const long long n_rows = r.next_int();
        for (long long i = 0; i < n_rows; ++i) {
            Window x;
            x.obs.resize(static_cast<std::size_t>(window_len));
            x.acts.resize(static_cast<std::size_t>(window_len - 1));
            for (int& o : x.obs) o = static_cast<int>(r.next_int());
            for (int& a : x.acts) a = static_cast<int>(r.next_int());
            p.set_row(h, x, r.next_doubles(n_actions));
        }
    }
    return p;
}

void WindowPolicy::save(const std::filesystem::path& path) const { write_file(path, to_text()); }

WindowPolicy WindowPolicy::load(const std::filesystem::path& path) {
    return from_text(read_file(path), path.string());
}

Trajectory sample_episode(const TabularPomdp& pomdp, const WindowPolicy& policy,
                          std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    Trajectory t;
    const int H = pomdp.horizon;
    t.observations.reserve(static_cast<std::size_t>(H) + 1);
    t.latent_states.reserve(static_cast<std::size_t>(H) + 1);
    int s = rng.categorical(pomdp.rho0);
    int o = rng.categorical(pomdp.emit_row(s));
    t.latent_states.push_back(s);
    t.observations.push_back(o);
    Window x = initial_window(policy.window_len(), o);
    for (int h = 0; h < H; ++h) {
        const int a = policy.sample(h, x, rng);
        t.actions.push_back(a);
        t.rewards.push_back(pomdp.reward_at(o, a));
        s = rng.categorical(pomdp.trans_row(s, a));
        o = rng.categorical(pomdp.emit_row(s));
        t.latent_states.push_back(s);
        t.observations.push_back(o);
        x = window_shift(x, a, o);
    }
    return t;
}

}  // namespace winpomdp
