#include "pqr/pqr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pqr {

std::string to_string(ExpectationMode m) {
    switch (m) {
        case ExpectationMode::known_transition: return "known_transition";
        case ExpectationMode::tabular_average: return "tabular_average";
        case ExpectationMode::net: return "net";
    }
    return "unknown";
}

ExpectationMode expectation_mode_from(const std::string& s) {
    if (s == "known_transition" || s == "exact") return ExpectationMode::known_transition;
    if (s == "tabular_average" || s == "average") return ExpectationMode::tabular_average;
    if (s == "net") return ExpectationMode::net;
    throw std::invalid_argument("unknown expectation mode '" + s + "'");
}

std::vector<double> state_features(const Env& env, StateView s) {
    if (const auto* mdp = std::get_if<TabularMdp>(&env)) {
        std::vector<double> f(static_cast<std::size_t>(mdp->n_states), 0.0);
        f[static_cast<std::size_t>(state_index(s))] = 1.0;
        return f;
    }
    const auto& syn = std::get<SyntheticMdp>(env);
    std::vector<double> f(s.begin(), s.end());
    for (auto& x : f) x /= syn.p;
    return f;
}

std::vector<double> state_action_features(const Env& env, StateView s, int a) {
    if (const auto* mdp = std::get_if<TabularMdp>(&env)) {
        std::vector<double> f(static_cast<std::size_t>(mdp->n_states + mdp->n_actions), 0.0);
        f[static_cast<std::size_t>(state_index(s))] = 1.0;
        f[static_cast<std::size_t>(mdp->n_states + a)] = 1.0;
        return f;
    }
    return synthetic_features(std::get<SyntheticMdp>(env), s, a);
}

namespace {

Matrix feature_columns(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (std::size_t d = 0; d < rows[c].size(); ++d)
            m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)) = rows[c][d];
    return m;
}

const TabularMdp& require_tabular(const Env& env, const char* what) {
    const auto* mdp = std::get_if<TabularMdp>(&env);
    if (!mdp) throw std::invalid_argument(std::string(what) + " requires a tabular environment");
    return *mdp;
}

}  // namespace

// ---------------------------------------------------------------------------
// Q estimate

QEstimate::QEstimate(std::shared_ptr<const PolicyEstimate> policy, StateFn anchor_component, double alpha,
                     int anchor_action)
    : policy_(std::move(policy)), anchor_(std::move(anchor_component)), alpha_(alpha), anchor_action_(anchor_action) {
    if (!policy_) throw std::invalid_argument("Q estimate needs a policy");
    if (!anchor_) throw std::invalid_argument("Q estimate needs an anchor component");
    if (anchor_action < 0 || anchor_action >= policy_->n_actions())
        throw std::invalid_argument("anchor action out of range");
}

QEstimate QEstimate::from_table(Matrix table, double alpha, int anchor_action) {
    if (anchor_action < 0 || anchor_action >= table.cols()) throw std::invalid_argument("anchor action out of range");
    auto t = std::make_shared<const Matrix>(std::move(table));
    QEstimate q(std::make_shared<const PolicyEstimate>(
                    PolicyRepresentation::exact, static_cast<int>(t->cols()), 0.5,
                    [](StateView) -> std::vector<double> {
                        throw std::logic_error("table-backed Q estimate has no policy");
                    }),
                [t, anchor_action](StateView s) { return (*t)(state_index(s), anchor_action); }, alpha,
                anchor_action);
    q.table_ = std::move(t);
    return q;
}

double QEstimate::q_value(StateView s, int a) const {
    if (table_) return (*table_)(state_index(s), a);
    // log terms cancel
    if (a == anchor_action_) return anchor_(s);
    const double log_ratio = policy_->log_prob(s, a) - policy_->log_prob(s, anchor_action_);
    return alpha_ * log_ratio + anchor_(s);
}

QEstimate q_estimator(std::shared_ptr<const PolicyEstimate> policy, StateFn anchor_values, double alpha,
                      int anchor_action) {
    return QEstimate(std::move(policy), std::move(anchor_values), alpha, anchor_action);
}

// ---------------------------------------------------------------------------
// Anchor fixed point with known transitions

AnchorSolution solve_qa_exact(const TabularMdp& mdp, const PolicyEstimate& policy, double tol, long max_iter,
                              std::optional<Vector> anchor_reward, std::optional<double> gamma,
                              std::optional<double> alpha) {
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    const double gm = gamma.value_or(mdp.gamma);
    const double al = alpha.value_or(mdp.alpha);
    const int aA = mdp.anchor_action;
    const Vector g = anchor_reward.value_or(mdp.anchor_reward());
    if (g.size() != mdp.n_states) throw std::invalid_argument("anchor reward length must equal n_states");

    Vector entropy_term(mdp.n_states);  // -alpha log pi(s', a_A)
    for (int s = 0; s < mdp.n_states; ++s) {
        const double lp = policy.log_prob(State{static_cast<double>(s)}, aA);
        if (!std::isfinite(lp)) throw std::invalid_argument("log pi(s, a_A) is not finite");
        entropy_term(s) = -al * lp;
    }

    AnchorSolution sol;
    sol.values = Vector::Zero(mdp.n_states);
    sol.residual = std::numeric_limits<double>::infinity();
    for (long it = 1; it <= max_iter; ++it) {
        const Vector lookahead = entropy_term + sol.values;
        Vector next(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) next(s) = g(s) + gm * mdp.expect(s, aA, lookahead);
        sol.residual = (next - sol.values).cwiseAbs().maxCoeff();
        sol.values = std::move(next);
        sol.iterations = it;
        if (sol.residual < tol) {
            sol.converged = true;
            break;
        }
    }
    return sol;
}

// ---------------------------------------------------------------------------
// FQI-I

int default_fqi_rounds(double gamma, double max_abs_target) {
    if (gamma <= 0.0 || max_abs_target <= 0.0) return 1;
    const double scale = 2.0 * max_abs_target / (1.0 - gamma);
    int n = 1;
    double factor = gamma;
    while (factor * scale >= 1e-3 && n < 100000) {
        factor *= gamma;
        ++n;
    }
    return n;
}

FqiResult fqi_identify(const TrajectoryDataset& ds, std::shared_ptr<const PolicyEstimate> policy,
                       const FqiConfig& config, const Env& env) {
    if (!policy) throw std::invalid_argument("FQI-I needs a policy estimate");
    const int aA = config.anchor_action;
    std::vector<const Transition*> anchor;
    for (const auto& tr : ds.transitions)
        if (tr.a == aA) anchor.push_back(&tr);
    if (anchor.empty())
        throw std::invalid_argument("no anchor-action transitions: 0 of " + std::to_string(ds.size()) +
                                    " records use action " + std::to_string(aA));
    if (config.rounds < 0) throw std::invalid_argument("rounds must be >= 0");

    auto g_of = [&](StateView s) { return config.anchor_reward ? config.anchor_reward(s) : 0.0; };
    const double gm = config.gamma;
    const double al = config.alpha;

    std::vector<FqiRound> log;
    StateFn final_anchor;

    if (config.mode == ExpectationMode::known_transition) {
        const auto& mdp = require_tabular(env, "known_transition mode");
        Vector g(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) g(s) = g_of(State{static_cast<double>(s)});
        TabularMdp anchored = mdp;
        anchored.anchor_action = aA;
        std::shared_ptr<const Vector> values;
        if (config.rounds == 0) {
            auto sol = solve_qa_exact(anchored, *policy, config.fixed_point_tol, 1'000'000, g, gm, al);
            log.push_back({static_cast<int>(sol.iterations), 0.0, 0.0, sol.residual});
            values = std::make_shared<const Vector>(std::move(sol.values));
        } else {
            Vector h = Vector::Zero(mdp.n_states);
            for (int k = 0; k < config.rounds; ++k) {
                Vector lookahead(mdp.n_states);
                for (int s = 0; s < mdp.n_states; ++s)
                    lookahead(s) = -al * policy->log_prob(State{static_cast<double>(s)}, aA) + h(s);
                Vector next(mdp.n_states);
                for (int s = 0; s < mdp.n_states; ++s) next(s) = g(s) + gm * mdp.expect(s, aA, lookahead);
                log.push_back({k + 1, 0.0, next.cwiseAbs().maxCoeff(), (next - h).cwiseAbs().maxCoeff()});
                h = std::move(next);
            }
            values = std::make_shared<const Vector>(std::move(h));
        }
        final_anchor = [values](StateView s) { return (*values)(state_index(s)); };
        return {q_estimator(std::move(policy), std::move(final_anchor), al, aA), std::move(log),
                static_cast<long>(anchor.size())};
    }

    // Sample-based modes: per-transition constants of the target update.
    const std::size_t n = anchor.size();
    Vector base(static_cast<Eigen::Index>(n));  // g(s_t) - gamma * alpha * log pi(s_{t+1}, a_A)
    for (std::size_t i = 0; i < n; ++i)
        base(static_cast<Eigen::Index>(i)) =
            g_of(anchor[i]->s) - gm * al * policy->log_prob(anchor[i]->s_next, aA);
    if (!base.allFinite()) throw std::invalid_argument("FQI-I targets are not finite (check the clip floor)");

    Vector h_next = Vector::Zero(static_cast<Eigen::Index>(n));  // h(s_{t+1})
    Vector h_curr = Vector::Zero(static_cast<Eigen::Index>(n));  // h(s_t)
    const int rounds = config.rounds > 0 ? config.rounds : default_fqi_rounds(gm, base.cwiseAbs().maxCoeff());

    if (config.mode == ExpectationMode::tabular_average) {
        const auto& mdp = require_tabular(env, "tabular_average mode");
        auto table = std::make_shared<Vector>(Vector::Zero(mdp.n_states));
        Vector counts = Vector::Zero(mdp.n_states);
        for (const auto* tr : anchor) counts(state_index(tr->s)) += 1.0;
        for (int k = 0; k < rounds; ++k) {
            const Vector y = base + gm * h_next;
            Vector sums = Vector::Zero(mdp.n_states);
            for (std::size_t i = 0; i < n; ++i) sums(state_index(anchor[i]->s)) += y(static_cast<Eigen::Index>(i));
            Vector fresh = Vector::Zero(mdp.n_states);
            for (int s = 0; s < mdp.n_states; ++s)
                if (counts(s) > 0) fresh(s) = sums(s) / counts(s);
            double loss = 0.0;
            Vector h_curr_new(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                h_curr_new(ii) = fresh(state_index(anchor[i]->s));
                loss += (y(ii) - h_curr_new(ii)) * (y(ii) - h_curr_new(ii));
                h_next(ii) = fresh(state_index(anchor[i]->s_next));
            }
            log.push_back({k + 1, loss / static_cast<double>(n), y.cwiseAbs().maxCoeff(),
                           (h_curr_new - h_curr).cwiseAbs().maxCoeff()});
            h_curr = std::move(h_curr_new);
            *table = std::move(fresh);
        }
        std::shared_ptr<const Vector> frozen = table;
        final_anchor = [frozen](StateView s) { return (*frozen)(state_index(s)); };
    } else {
        std::vector<std::vector<double>> xs, xn;
        xs.reserve(n);
        xn.reserve(n);
        for (const auto* tr : anchor) {
            xs.push_back(state_features(env, tr->s));
            xn.push_back(state_features(env, tr->s_next));
        }
        const Matrix x_curr = feature_columns(xs);
        const Matrix x_next = feature_columns(xn);
        std::shared_ptr<const TwoLayerReluNet> net;
        for (int k = 0; k < rounds; ++k) {
            const Vector y = base + gm * h_next;
            TrainerConfig tc = config.trainer;
            tc.seed = derive_seed(config.trainer.seed, static_cast<std::uint64_t>(k));
            TrainResult res;
            try {
                res = train_regressor(x_curr, y, tc);
            } catch (const DivergenceError&) {
                throw DivergenceError("FQI-I regressor diverged in round " + std::to_string(k + 1), k + 1);
            }
            net = std::make_shared<const TwoLayerReluNet>(std::move(res.net));
            const Vector fresh_curr = net->forward(x_curr).row(0).transpose();
            h_next = net->forward(x_next).row(0).transpose();
            log.push_back({k + 1, res.final_loss, y.cwiseAbs().maxCoeff(), (fresh_curr - h_curr).cwiseAbs().maxCoeff()});
            h_curr = fresh_curr;
        }
        const Env env_copy = env;
        final_anchor = [net, env_copy](StateView s) { return net->predict(state_features(env_copy, s)); };
    }

    return {q_estimator(std::move(policy), std::move(final_anchor), al, aA), std::move(log),
            static_cast<long>(n)};
}

// ---------------------------------------------------------------------------
// Reward estimation

Matrix RewardEstimate::tabulate(int n_states, int n_actions) const { return pqr::tabulate(reward, n_states, n_actions); }

Matrix tabulate(const StateActionFn& f, int n_states, int n_actions) {
    Matrix out(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        const State st{static_cast<double>(s)};
        for (int a = 0; a < n_actions; ++a) out(s, a) = f(st, a);
    }
    return out;
}

RewardEstimate reward_estimation(const TrajectoryDataset& ds, const QEstimate& q, const PolicyEstimate& policy,
                                 const RewardConfig& config, const Env& env) {
    if (ds.empty()) throw std::invalid_argument("reward estimation needs a non-empty dataset");
    const double gm = config.gamma;
    const double al = config.alpha;
    const int aA = q.anchor_action();

    RewardEstimate est;
    est.provenance = {{"gamma", gm},
                      {"alpha", al},
                      {"anchor_action", aA},
                      {"mode", to_string(config.mode)},
                      {"dataset", {{"seed", ds.meta.seed}, {"T", ds.meta.length}, {"gamma", ds.meta.gamma},
                                   {"alpha", ds.meta.alpha}}}};

    if (gm == 0.0) {
        est.reward = [q](StateView s, int a) { return q.q_value(s, a); };
        est.expectation_model = [](StateView, int) { return 0.0; };
        return est;
    }

    auto next_value = [&](StateView s) { return -al * policy.log_prob(s, aA) + q.q_value(s, aA); };

    StateActionFn model;
    if (config.mode == ExpectationMode::known_transition) {
        const auto& mdp = require_tabular(env, "known_transition mode");
        Vector v(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) v(s) = next_value(State{static_cast<double>(s)});
        auto table = std::make_shared<Matrix>(mdp.n_states, mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a) (*table)(s, a) = mdp.expect(s, a, v);
        std::shared_ptr<const Matrix> frozen = table;
        model = [frozen](StateView s, int a) { return (*frozen)(state_index(s), a); };
    } else {
        Vector y(static_cast<Eigen::Index>(ds.size()));
        for (std::size_t i = 0; i < ds.size(); ++i) y(static_cast<Eigen::Index>(i)) = next_value(ds.transitions[i].s_next);
        if (!y.allFinite()) throw std::invalid_argument("reward-estimation targets are not finite");

        if (config.mode == ExpectationMode::tabular_average) {
            const auto& mdp = require_tabular(env, "tabular_average mode");
            Matrix sums = Matrix::Zero(mdp.n_states, mdp.n_actions);
            Matrix counts = Matrix::Zero(mdp.n_states, mdp.n_actions);
            for (std::size_t i = 0; i < ds.size(); ++i) {
                const auto& tr = ds.transitions[i];
                sums(state_index(tr.s), tr.a) += y(static_cast<Eigen::Index>(i));
                counts(state_index(tr.s), tr.a) += 1.0;
            }
            // unvisited pairs fall back to the overall target mean
            const double fallback = y.mean();
            auto table = std::make_shared<Matrix>(mdp.n_states, mdp.n_actions);
            for (int s = 0; s < mdp.n_states; ++s)
                for (int a = 0; a < mdp.n_actions; ++a)
                    (*table)(s, a) = counts(s, a) > 0 ? sums(s, a) / counts(s, a) : fallback;
            double loss = 0.0;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                const auto& tr = ds.transitions[i];
                const double e = y(static_cast<Eigen::Index>(i)) - (*table)(state_index(tr.s), tr.a);
                loss += e * e;
            }
            est.train_loss = loss / static_cast<double>(ds.size());
            std::shared_ptr<const Matrix> frozen = table;
            model = [frozen](StateView s, int a) { return (*frozen)(state_index(s), a); };
        } else {
            std::vector<std::vector<double>> xs;
            xs.reserve(ds.size());
            for (const auto& tr : ds.transitions) xs.push_back(state_action_features(env, tr.s, tr.a));
            TrainResult res = train_regressor(feature_columns(xs), y, config.trainer);
            est.train_loss = res.final_loss;
            auto net = std::make_shared<const TwoLayerReluNet>(std::move(res.net));
            const Env env_copy = env;
            model = [net, env_copy](StateView s, int a) { return net->predict(state_action_features(env_copy, s, a)); };
        }
    }

    est.expectation_model = model;
    est.reward = [q, model, gm](StateView s, int a) { return q.q_value(s, a) - gm * model(s, a); };
    return est;
}

// ---------------------------------------------------------------------------
// Full pipeline

nlohmann::json PqrConfig::to_json() const {
    return {{"gamma", gamma},
            {"alpha", alpha},
            {"rounds", rounds},
            {"anchor_action", anchor_action},
            {"anchor_reward", anchor_reward == AnchorRewardSource::env ? "env" : "zero"},
            {"mode", pqr::to_string(mode)},
            {"policy", policy_fit.to_json()},
            {"q_trainer", q_trainer.to_json()},
            {"reward_trainer", reward_trainer.to_json()},
            {"clip_floor", clip_floor},
            {"seed", seed},
            {"fixed_point_tol", fixed_point_tol}};
}

PqrConfig PqrConfig::from_json(const nlohmann::json& j) {
    PqrConfig c;
    c.gamma = j.value("gamma", c.gamma);
    c.alpha = j.value("alpha", c.alpha);
    c.rounds = j.value("rounds", c.rounds);
    c.anchor_action = j.value("anchor_action", c.anchor_action);
    const auto src = j.value("anchor_reward", std::string("env"));
    if (src != "env" && src != "zero") throw std::invalid_argument("anchor_reward must be \"env\" or \"zero\"");
    c.anchor_reward = src == "env" ? AnchorRewardSource::env : AnchorRewardSource::zero;
    c.mode = expectation_mode_from(j.value("mode", std::string("net")));
    if (j.contains("policy")) c.policy_fit = PolicyFitConfig::from_json(j["policy"]);
    if (j.contains("q_trainer")) c.q_trainer = TrainerConfig::from_json(j["q_trainer"]);
    if (j.contains("reward_trainer")) c.reward_trainer = TrainerConfig::from_json(j["reward_trainer"]);
    c.clip_floor = j.value("clip_floor", c.clip_floor);
    c.seed = j.value("seed", c.seed);
    c.fixed_point_tol = j.value("fixed_point_tol", c.fixed_point_tol);
    if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (!(c.alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    if (!(c.clip_floor > 0.0 && c.clip_floor < 1.0)) throw std::invalid_argument("clip_floor must lie in (0, 1)");
    return c;
}

PqrRun pqr_full(const TrajectoryDataset& ds, const PqrConfig& config, const Env& env,
                std::shared_ptr<const PolicyEstimate> policy_override) {
    const std::uint64_t policy_seed = derive_seed(config.seed, 1);
    const std::uint64_t fqi_seed = derive_seed(config.seed, 2);
    const std::uint64_t reward_seed = derive_seed(config.seed, 3);

    PqrRun run{nullptr, {QEstimate::from_table(Matrix::Zero(1, 1), 1.0, 0), {}, 0}, {}, {}};

    try {
        if (policy_override) {
            run.policy = std::make_shared<const PolicyEstimate>(policy_override->with_clip_floor(config.clip_floor));
        } else {
            PolicyFitConfig pc = config.policy_fit;
            pc.trainer.seed = policy_seed;
            pc.trainer.clip_floor = config.clip_floor;
            run.policy = std::make_shared<const PolicyEstimate>(fit_policy_mle(ds, env, pc));
        }
    } catch (const std::exception& e) {
        throw StageError("policy", e.what());
    }

    StateFn g;
    if (config.anchor_reward == AnchorRewardSource::env) {
        const Env env_copy = env;
        const int aA = config.anchor_action;
        g = [env_copy, aA](StateView s) { return env_reward(env_copy, s, aA); };
    }

    try {
        FqiConfig fc;
        fc.gamma = config.gamma;
        fc.alpha = config.alpha;
        fc.rounds = config.rounds;
        fc.anchor_action = config.anchor_action;
        fc.anchor_reward = g;
        fc.mode = config.mode;
        fc.trainer = config.q_trainer;
        fc.trainer.seed = fqi_seed;
        fc.fixed_point_tol = config.fixed_point_tol;
        run.fqi = fqi_identify(ds, run.policy, fc, env);
    } catch (const std::exception& e) {
        throw StageError("fqi", e.what());
    }

    try {
        RewardConfig rc{config.gamma, config.alpha, config.mode, config.reward_trainer};
        rc.trainer.seed = reward_seed;
        run.reward = reward_estimation(ds, run.fqi.q, *run.policy, rc, env);
    } catch (const std::exception& e) {
        throw StageError("reward", e.what());
    }

    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : run.fqi.rounds)
        rounds.push_back({{"round", r.round},
                          {"train_loss", r.train_loss},
                          {"max_abs_target", r.max_abs_target},
                          {"anchor_change", r.anchor_change}});
    run.manifest = {{"stage_seeds", {{"policy", policy_seed}, {"fqi", fqi_seed}, {"reward", reward_seed}}},
                    {"policy", {{"representation", to_string(run.policy->representation())},
                                {"single_action_warning", run.policy->single_action_warning},
                                {"final_loss", run.policy->loss_curve.empty() ? 0.0 : run.policy->loss_curve.back()}}},
                    {"anchor_transitions", run.fqi.anchor_transitions},
                    {"fqi_rounds", rounds},
                    {"re_train_loss", run.reward.train_loss},
                    {"config_echo", config.to_json()},
                    {"dataset", {{"seed", ds.meta.seed}, {"T", ds.meta.length}}}};
    return run;
}

Matrix shaping_probe(const TabularMdp& mdp, const Vector& phi) {
    if (phi.size() != mdp.n_states) throw std::invalid_argument("phi length must equal n_states");
    Matrix out(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            out(s, a) = mdp.reward(s, a) + phi(s) - mdp.gamma * mdp.expect(s, a, phi);
    return out;
}

}  // namespace pqr
