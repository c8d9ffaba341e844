#include "pqr/soft_mdp.hpp"

#include "pqr/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pqr {

double soft_max_value(std::span<const double> x, double alpha) {
    const double mx = *std::max_element(x.begin(), x.end());
    double acc = 0.0;
    for (double v : x) acc += std::exp((v - mx) / alpha);
    return mx + alpha * std::log(acc);
}

// ---------------------------------------------------------------------------
// TabularMdp

TabularMdp TabularMdp::make(int n_states, int n_actions, std::vector<double> transition,
                            Matrix reward, double gamma, double alpha, int anchor_action) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transition = std::move(transition);
    mdp.reward = std::move(reward);
    mdp.gamma = gamma;
    mdp.alpha = alpha;
    mdp.anchor_action = anchor_action;
    mdp.validate();
    return mdp;
}

void TabularMdp::validate() const {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("n_states and n_actions must be positive");
    const auto expected = static_cast<std::size_t>(n_states) * n_actions * n_states;
    if (transition.size() != expected)
        throw std::invalid_argument("transition tensor has " + std::to_string(transition.size()) +
                                    " entries, expected " + std::to_string(expected));
    if (reward.rows() != n_states || reward.cols() != n_actions)
        throw std::invalid_argument("reward table shape does not match n_states x n_actions");
    if (!reward.allFinite()) throw std::invalid_argument("reward table contains non-finite entries");
    // gamma = 0 is admitted: the degenerate one-step case is a supported input.
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be > 0");
    if (anchor_action < 0 || anchor_action >= n_actions)
        throw std::invalid_argument("anchor_action out of range");
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double total = 0.0;
            for (double pr : row(s, a)) {
                if (!(pr >= 0.0) || !std::isfinite(pr))
                    throw std::invalid_argument("negative or non-finite transition probability at (" +
                                                std::to_string(s) + "," + std::to_string(a) + ")");
                total += pr;
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw std::invalid_argument("transition row (" + std::to_string(s) + "," +
                                            std::to_string(a) + ") sums to " + std::to_string(total));
        }
}

double TabularMdp::expect(int s, int a, const Vector& f) const {
    double acc = 0.0;
    const auto r = row(s, a);
    for (int s2 = 0; s2 < n_states; ++s2) acc += r[static_cast<std::size_t>(s2)] * f(s2);
    return acc;
}

Vector soft_value(const Matrix& q, double alpha) {
    Vector v(q.rows());
    std::vector<double> buf(static_cast<std::size_t>(q.cols()));
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        for (Eigen::Index a = 0; a < q.cols(); ++a) buf[static_cast<std::size_t>(a)] = q(s, a);
        v(s) = soft_max_value(buf, alpha);
    }
    return v;
}

Matrix soft_policy(const Matrix& q, double alpha) {
    const Vector v = soft_value(q, alpha);
    Matrix pi(q.rows(), q.cols());
    for (Eigen::Index s = 0; s < q.rows(); ++s)
        for (Eigen::Index a = 0; a < q.cols(); ++a) pi(s, a) = std::exp((q(s, a) - v(s)) / alpha);
    return pi;
}

Matrix soft_bellman_backup(const TabularMdp& mdp, const Matrix& q) {
    if (q.rows() != mdp.n_states || q.cols() != mdp.n_actions)
        throw std::invalid_argument("Q-table shape does not match the MDP");
    for (Eigen::Index s = 0; s < q.rows(); ++s)
        for (Eigen::Index a = 0; a < q.cols(); ++a)
            if (!std::isfinite(q(s, a)))
                throw std::invalid_argument("non-finite Q entry at (" + std::to_string(s) + "," +
                                            std::to_string(a) + ")");
    const Vector v = soft_value(q, mdp.alpha);
    Matrix out(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            out(s, a) = mdp.reward(s, a) + mdp.gamma * mdp.expect(s, a, v);
    return out;
}

SoftSolution solve_soft(const TabularMdp& mdp, double tol, long max_iter) {
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    SoftSolution sol;
    sol.q = Matrix::Zero(mdp.n_states, mdp.n_actions);
    sol.residual = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= max_iter; ++it) {
        Matrix next = soft_bellman_backup(mdp, sol.q);
        sol.residual = (next - sol.q).cwiseAbs().maxCoeff();
        sol.q = std::move(next);
        sol.iterations = it;
        if (sol.residual < tol) {
            sol.converged = true;
            break;
        }
    }
    sol.v = soft_value(sol.q, mdp.alpha);
    sol.policy = soft_policy(sol.q, mdp.alpha);
    return sol;
}

// ---------------------------------------------------------------------------
// SyntheticMdp

SyntheticMdp SyntheticMdp::make(int p, std::uint64_t seed, double gamma, double alpha,
                                SyntheticReward kind) {
    SyntheticMdp env;
    env.p = p;
    env.gamma = gamma;
    env.alpha = alpha;
    env.seed = seed;
    env.reward_kind = kind;
    if (p < 1) throw std::invalid_argument("p must be >= 1");
    Rng rng(derive_seed(seed, 0));
    env.omega.resize(static_cast<std::size_t>(p) + 1);
    for (auto& w : env.omega) {
        do w = uniform01(rng);
        while (w <= 0.0);
    }
    env.validate();
    return env;
}

void SyntheticMdp::validate() const {
    if (p < 1) throw std::invalid_argument("p must be >= 1");
    if (omega.size() != static_cast<std::size_t>(p) + 1)
        throw std::invalid_argument("omega must have length p + 1");
    double total = 0.0;
    for (double w : omega) total += w;
    if (!(std::abs(total) > 0.0)) throw std::invalid_argument("omega must not sum to zero");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
}

bool SyntheticMdp::contains(StateView s) const {
    if (s.size() != static_cast<std::size_t>(p)) return false;
    const double bound = p;
    return std::all_of(s.begin(), s.end(),
                       [bound](double x) { return std::isfinite(x) && x >= -bound && x <= bound; });
}

double synthetic_reward(const SyntheticMdp& env, StateView s, int a) {
    if (!env.contains(s)) throw std::invalid_argument("state outside the box [-p, p]^p");
    if (a < 0 || a >= SyntheticMdp::n_actions) throw std::invalid_argument("action out of range");
    double z = 0.0;
    double wsum = 0.0;
    for (int i = 0; i < env.p; ++i) {
        z += s[static_cast<std::size_t>(i)] / env.p * env.omega[static_cast<std::size_t>(i)];
        wsum += env.omega[static_cast<std::size_t>(i)];
    }
    z += a / 4.0 * env.omega.back();
    wsum += env.omega.back();
    if (env.reward_kind == SyntheticReward::state_only) return std::tanh(z);
    return a * std::tanh(z) / (4.0 * wsum);
}

State sample_box_state(const SyntheticMdp& env, Rng& rng) {
    State s(static_cast<std::size_t>(env.p));
    for (auto& x : s) x = -env.p + 2.0 * env.p * uniform01(rng);
    return s;
}

State synthetic_step(const SyntheticMdp& env, StateView s, int a, Rng& rng) {
    if (!env.contains(s)) throw std::invalid_argument("state outside the box [-p, p]^p");
    if (a < 0 || a >= SyntheticMdp::n_actions) throw std::invalid_argument("action out of range");
    State next(s.begin(), s.end());
    const double drift = a / 5.0 - 0.5;
    for (auto& x : next) x += drift;
    if (env.contains(next)) return next;
    return sample_box_state(env, rng);
}

// ---------------------------------------------------------------------------
// Fitted soft-Q expert

std::vector<double> synthetic_features(const SyntheticMdp& env, StateView s, int a) {
    std::vector<double> f(static_cast<std::size_t>(env.p) + 1);
    for (int i = 0; i < env.p; ++i) f[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)] / env.p;
    f.back() = a / 4.0;
    return f;
}

namespace {

Matrix to_columns(const std::vector<State>& states, int p) {
    Matrix m(p, static_cast<Eigen::Index>(states.size()));
    for (std::size_t c = 0; c < states.size(); ++c)
        for (int i = 0; i < p; ++i) m(i, static_cast<Eigen::Index>(c)) = states[c][static_cast<std::size_t>(i)];
    return m;
}

Vector net_values(const SyntheticMdp& env, const TwoLayerReluNet* net, const Matrix& states) {
    if (!net) return Vector::Zero(states.cols());
    return net->forward(states / env.p).row(0).transpose();
}

// Drifted successors of every (s, a) pair that stay in the box; the rest
// take the reset branch.
struct NextStates {
    Matrix in_box;                   // p x k
    std::vector<Eigen::Index> slot;  // per pair (index s * 5 + a): column in in_box, or -1
};

NextStates next_states(const SyntheticMdp& env, const Matrix& states) {
    constexpr int A = SyntheticMdp::n_actions;
    NextStates ns;
    std::vector<State> kept;
    ns.slot.reserve(static_cast<std::size_t>(states.cols()) * A);
    for (Eigen::Index c = 0; c < states.cols(); ++c)
        for (int a = 0; a < A; ++a) {
            State d(states.col(c).data(), states.col(c).data() + env.p);
            for (auto& x : d) x += a / 5.0 - 0.5;
            if (env.contains(d)) {
                ns.slot.push_back(static_cast<Eigen::Index>(kept.size()));
                kept.push_back(std::move(d));
            } else {
                ns.slot.push_back(-1);
            }
        }
    ns.in_box = to_columns(kept, env.p);
    return ns;
}

Vector pair_rewards(const SyntheticMdp& env, const Matrix& states) {
    constexpr int A = SyntheticMdp::n_actions;
    Vector r(states.cols() * A);
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
        const State s(states.col(c).data(), states.col(c).data() + env.p);
        for (int a = 0; a < A; ++a) r(c * A + a) = synthetic_reward(env, s, a);
    }
    return r;
}

// Q for every pair given a value function (net, reset value).
Vector lookahead_q(const SyntheticMdp& env, const TwoLayerReluNet* net, double reset, const Vector& rewards,
                   const NextStates& ns) {
    const Vector v_next = net_values(env, net, ns.in_box);
    Vector q(rewards.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const Eigen::Index k = ns.slot[static_cast<std::size_t>(i)];
        q(i) = rewards(i) + env.gamma * (k >= 0 ? v_next(k) : reset);
    }
    return q;
}

Vector soft_values(const SyntheticMdp& env, const Vector& q) {
    constexpr int A = SyntheticMdp::n_actions;
    Vector v(q.size() / A);
    for (Eigen::Index c = 0; c < v.size(); ++c) v(c) = soft_max_value(std::span<const double>(q.data() + c * A, A), env.alpha);
    return v;
}

// Everything needed to back up V on a fixed state sample.
struct BackupSample {
    Matrix states;
    Vector rewards;
    NextStates next;
};

BackupSample backup_sample(const SyntheticMdp& env, const std::vector<State>& states) {
    BackupSample b;
    b.states = to_columns(states, env.p);
    b.rewards = pair_rewards(env, b.states);
    b.next = next_states(env, b.states);
    return b;
}

}  // namespace

double FittedSoftQ::value_net(StateView s) const {
    std::vector<double> x(s.begin(), s.end());
    for (auto& v : x) v /= env_.p;
    return net_.predict(x);
}

double FittedSoftQ::q(StateView s, int a) const {
    const double r = synthetic_reward(env_, s, a);
    State d(s.begin(), s.end());
    for (auto& x : d) x += a / 5.0 - 0.5;
    return r + env_.gamma * (env_.contains(d) ? value_net(d) : reset_value_);
}

std::vector<double> FittedSoftQ::q_row(StateView s) const {
    std::vector<double> row(SyntheticMdp::n_actions);
    for (int a = 0; a < SyntheticMdp::n_actions; ++a) row[static_cast<std::size_t>(a)] = q(s, a);
    return row;
}

double FittedSoftQ::v(StateView s) const { return soft_max_value(q_row(s), env_.alpha); }

std::vector<double> FittedSoftQ::log_policy(StateView s) const {
    auto row = q_row(s);
    const double v = soft_max_value(row, env_.alpha);
    for (auto& x : row) x = (x - v) / env_.alpha;
    return row;
}

std::vector<double> FittedSoftQ::policy(StateView s) const {
    auto row = log_policy(s);
    for (auto& x : row) x = std::exp(x);
    return row;
}

nlohmann::json FittedSoftQ::to_json() const {
    return {{"env", pqr::to_json(env_)},
            {"value_net", net_.to_json()},
            {"reset_value", reset_value_},
            {"round_losses", round_losses},
            {"heldout_residual", heldout_residual}};
}

FittedSoftQ FittedSoftQ::from_json(const nlohmann::json& j) {
    FittedSoftQ f(synthetic_from_json(j.at("env")), TwoLayerReluNet::from_json(j.at("value_net")),
                  j.at("reset_value").get<double>());
    f.round_losses = j.value("round_losses", std::vector<double>{});
    f.heldout_residual = j.value("heldout_residual", 0.0);
    return f;
}

nlohmann::json FittedSoftQConfig::to_json() const {
    return {{"train_states", train_states},   {"reference_states", reference_states},
            {"rounds", rounds},               {"heldout_states", heldout_states},
            {"residual_threshold", residual_threshold}, {"trainer", trainer.to_json()},
            {"warm_iterations", warm_iterations}};
}

FittedSoftQConfig FittedSoftQConfig::from_json(const nlohmann::json& j) {
    FittedSoftQConfig c;
    c.train_states = j.value("train_states", c.train_states);
    c.reference_states = j.value("reference_states", c.reference_states);
    c.rounds = j.value("rounds", c.rounds);
    c.heldout_states = j.value("heldout_states", c.heldout_states);
    c.residual_threshold = j.value("residual_threshold", c.residual_threshold);
    if (j.contains("trainer")) c.trainer = TrainerConfig::from_json(j["trainer"]);
    c.warm_iterations = j.value("warm_iterations", c.warm_iterations);
    return c;
}

std::vector<State> FittedSoftQ::reference_sample(const SyntheticMdp& env, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<State> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample_box_state(env, rng));
    return out;
}

FittedSoftQ fitted_soft_q(const SyntheticMdp& env, const FittedSoftQConfig& config) {
    env.validate();
    if (config.train_states < 1 || config.reference_states < 1 || config.rounds < 1)
        throw std::invalid_argument("fitted soft-Q needs train_states, reference_states, rounds >= 1");

    const auto seed = config.trainer.seed;
    const auto train = backup_sample(env, FittedSoftQ::reference_sample(env, config.train_states, derive_seed(seed, 1)));
    const Matrix reference =
        to_columns(FittedSoftQ::reference_sample(env, config.reference_states, derive_seed(seed, 2)), env.p);
    const auto heldout =
        backup_sample(env, FittedSoftQ::reference_sample(env, std::max(1, config.heldout_states), derive_seed(seed, 3)));
    const Matrix x = train.states / env.p;

    std::optional<TwoLayerReluNet> net;
    std::vector<double> losses;
    for (int k = 0; k < config.rounds; ++k) {
        const TwoLayerReluNet* cur = net ? &*net : nullptr;
        const double reset = net_values(env, cur, reference).mean();
        const Vector y = soft_values(env, lookahead_q(env, cur, reset, train.rewards, train.next));
        if (!y.allFinite()) throw DivergenceError("soft value targets are not finite", k);
        TrainResult res;
        try {
            if (!net) {
                res = train_regressor(x, y, config.trainer);
            } else {
                TrainerConfig warm = config.trainer;
                warm.iterations = config.warm_iterations;
                res = continue_regressor(std::move(*net), x, y, warm);
            }
        } catch (const DivergenceError&) {
            throw DivergenceError("soft value regression diverged", k);
        }
        net = std::move(res.net);
        losses.push_back(res.final_loss);
    }

    const double reset = net_values(env, &*net, reference).mean();
    FittedSoftQ fitted(env, std::move(*net), reset);
    fitted.round_losses = std::move(losses);

    // Q residual: Q(s, a) - [r(s, a) + gamma E softmax-value of Q at s'].
    // The reset branch uses the reference-sample mean of the soft value.
    const Vector q = lookahead_q(env, &fitted.net(), reset, heldout.rewards, heldout.next);
    const auto soft_value_at = [&](const Matrix& states) {
        const BackupSample b = backup_sample(env, [&] {
            std::vector<State> v;
            for (Eigen::Index c = 0; c < states.cols(); ++c)
                v.emplace_back(states.col(c).data(), states.col(c).data() + env.p);
            return v;
        }());
        return soft_values(env, lookahead_q(env, &fitted.net(), reset, b.rewards, b.next));
    };
    const Vector v_next = soft_value_at(heldout.next.in_box);
    const double v_reset = soft_value_at(reference).mean();
    double sq = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const Eigen::Index k = heldout.next.slot[static_cast<std::size_t>(i)];
        const double target = heldout.rewards(i) + env.gamma * (k >= 0 ? v_next(k) : v_reset);
        sq += (q(i) - target) * (q(i) - target);
    }
    fitted.heldout_residual = sq / static_cast<double>(q.size());
    return fitted;
}

// ---------------------------------------------------------------------------
// Env variant

int env_n_actions(const Env& env) {
    return std::visit([](const auto& e) { return static_cast<int>(e.n_actions); }, env);
}
double env_gamma(const Env& env) {
    return std::visit([](const auto& e) { return e.gamma; }, env);
}
double env_alpha(const Env& env) {
    return std::visit([](const auto& e) { return e.alpha; }, env);
}

bool env_contains(const Env& env, StateView s) {
    if (const auto* t = std::get_if<TabularMdp>(&env)) {
        if (s.size() != 1) return false;
        const double x = s[0];
        return x >= 0 && x < t->n_states && x == std::floor(x);
    }
    return std::get<SyntheticMdp>(env).contains(s);
}

State env_initial_state(const Env& env, Rng& rng) {
    if (const auto* t = std::get_if<TabularMdp>(&env))
        return {static_cast<double>(std::min(t->n_states - 1, static_cast<int>(uniform01(rng) * t->n_states)))};
    return sample_box_state(std::get<SyntheticMdp>(env), rng);
}

State env_step(const Env& env, StateView s, int a, Rng& rng) {
    if (const auto* t = std::get_if<TabularMdp>(&env)) {
        if (!env_contains(env, s)) throw std::invalid_argument("state outside the tabular state space");
        if (a < 0 || a >= t->n_actions) throw std::invalid_argument("action out of range");
        return {static_cast<double>(sample_index(t->row(state_index(s), a), rng))};
    }
    return synthetic_step(std::get<SyntheticMdp>(env), s, a, rng);
}

double env_reward(const Env& env, StateView s, int a) {
    if (const auto* t = std::get_if<TabularMdp>(&env)) return t->reward(state_index(s), a);
    return synthetic_reward(std::get<SyntheticMdp>(env), s, a);
}

std::string env_name(const Env& env) {
    if (const auto* t = std::get_if<TabularMdp>(&env))
        return "tabular" + std::to_string(t->n_states) + "x" + std::to_string(t->n_actions);
    const auto& e = std::get<SyntheticMdp>(env);
    return std::string(e.reward_kind == SyntheticReward::state_only ? "synthetic-state-only" : "synthetic") +
           "-p" + std::to_string(e.p);
}

nlohmann::json to_json(const TabularMdp& mdp) {
    nlohmann::json reward = nlohmann::json::array();
    nlohmann::json transition = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        nlohmann::json rrow = nlohmann::json::array();
        nlohmann::json trow = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            rrow.push_back(mdp.reward(s, a));
            const auto r = mdp.row(s, a);
            trow.push_back(std::vector<double>(r.begin(), r.end()));
        }
        reward.push_back(std::move(rrow));
        transition.push_back(std::move(trow));
    }
    return {{"n_states", mdp.n_states}, {"n_actions", mdp.n_actions},
            {"gamma", mdp.gamma},       {"alpha", mdp.alpha},
            {"anchor_action", mdp.anchor_action}, {"reward", reward},
            {"transition", transition}};
}

nlohmann::json to_json(const SyntheticMdp& env) {
    return {{"p", env.p},
            {"gamma", env.gamma},
            {"alpha", env.alpha},
            {"omega", env.omega},
            {"seed", env.seed},
            {"reward_kind", env.reward_kind == SyntheticReward::state_only ? "state_only" : "standard"}};
}

nlohmann::json env_to_json(const Env& env) {
    return std::visit([](const auto& e) { return to_json(e); }, env);
}

TabularMdp tabular_from_json(const nlohmann::json& j) {
    const int ns = j.at("n_states").get<int>();
    const int na = j.at("n_actions").get<int>();
    const auto& rj = j.at("reward");
    const auto& tj = j.at("transition");
    if (static_cast<int>(rj.size()) != ns || static_cast<int>(tj.size()) != ns)
        throw std::invalid_argument("reward/transition outer length must equal n_states");
    Matrix reward(ns, na);
    std::vector<double> transition;
    transition.reserve(static_cast<std::size_t>(ns) * na * ns);
    for (int s = 0; s < ns; ++s) {
        if (static_cast<int>(rj[s].size()) != na || static_cast<int>(tj[s].size()) != na)
            throw std::invalid_argument("reward/transition row " + std::to_string(s) +
                                        " must have n_actions entries");
        for (int a = 0; a < na; ++a) {
            reward(s, a) = rj[s][a].get<double>();
            if (static_cast<int>(tj[s][a].size()) != ns)
                throw std::invalid_argument("transition row (" + std::to_string(s) + "," +
                                            std::to_string(a) + ") must have n_states entries");
            for (const auto& pr : tj[s][a]) transition.push_back(pr.get<double>());
        }
    }
    return TabularMdp::make(ns, na, std::move(transition), std::move(reward), j.at("gamma").get<double>(),
                            j.at("alpha").get<double>(), j.value("anchor_action", 0));
}

SyntheticMdp synthetic_from_json(const nlohmann::json& j) {
    const auto kind = j.value("reward_kind", std::string("standard")) == "state_only"
                          ? SyntheticReward::state_only
                          : SyntheticReward::standard;
    SyntheticMdp env = SyntheticMdp::make(j.at("p").get<int>(), j.value("seed", std::uint64_t{0}),
                                          j.value("gamma", 0.9), j.value("alpha", 1.0), kind);
    if (j.contains("omega")) env.omega = j["omega"].get<std::vector<double>>();
    env.validate();
    return env;
}

Env env_from_json(const nlohmann::json& j) {
    if (j.contains("fixture")) return fixture_from_json(j);
    if (j.contains("n_states")) return tabular_from_json(j);
    if (j.contains("p")) return synthetic_from_json(j);
    throw std::invalid_argument("environment JSON has neither \"n_states\" nor \"p\"");
}

nlohmann::json to_json(const SoftSolution& sol) {
    auto table = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json r = nlohmann::json::array();
            for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
            rows.push_back(std::move(r));
        }
        return rows;
    };
    return {{"q", table(sol.q)},
            {"v", std::vector<double>(sol.v.data(), sol.v.data() + sol.v.size())},
            {"policy", table(sol.policy)},
            {"residual", sol.residual},
            {"iterations", sol.iterations},
            {"converged", sol.converged}};
}

}  // namespace pqr
