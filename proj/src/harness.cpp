#include "pqr/harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <mutex>

namespace pqr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int state_dim(const Env& env) {
    if (const auto* syn = std::get_if<SyntheticMdp>(&env)) return syn->p;
    return 1;
}

State reference_state(const Env& env) { return State(static_cast<std::size_t>(state_dim(env)), 0.0); }

}  // namespace

double evaluate_mse(const StateActionFn& estimate, const StateActionFn& truth, const EvalSet& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("evaluation set is empty");
    double acc = 0.0;
    for (const auto& [s, a] : eval_set) {
        const double d = estimate(s, a) - truth(s, a);
        acc += d * d;
    }
    return acc / static_cast<double>(eval_set.size());
}

EvalSet dataset_eval_set(const TrajectoryDataset& ds) {
    EvalSet out;
    out.reserve(ds.size());
    for (const auto& tr : ds.transitions) out.push_back({tr.s, tr.a});
    return out;
}

EvalSet grid_eval_set(const Env& env, int n_states, std::uint64_t seed) {
    EvalSet out;
    const int na = env_n_actions(env);
    if (const auto* mdp = std::get_if<TabularMdp>(&env)) {
        for (int s = 0; s < mdp->n_states; ++s)
            for (int a = 0; a < na; ++a) out.push_back({State{static_cast<double>(s)}, a});
        return out;
    }
    if (n_states < 1) throw std::invalid_argument("grid needs at least one state");
    Rng rng(seed);
    const auto& syn = std::get<SyntheticMdp>(env);
    for (int i = 0; i < n_states; ++i) {
        const State s = sample_box_state(syn, rng);
        for (int a = 0; a < na; ++a) out.push_back({s, a});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ground truth

namespace {

std::mutex expert_mutex;
std::map<std::string, std::shared_ptr<const FittedSoftQ>> expert_cache;

std::shared_ptr<const FittedSoftQ> cached_expert(const SyntheticMdp& env, const FittedSoftQConfig& cfg) {
    const std::string key = to_json(env).dump() + cfg.to_json().dump();
    {
        std::lock_guard lock(expert_mutex);
        if (auto it = expert_cache.find(key); it != expert_cache.end()) return it->second;
    }
    auto fitted = std::make_shared<const FittedSoftQ>(fitted_soft_q(env, cfg));
    std::lock_guard lock(expert_mutex);
    return expert_cache.emplace(key, std::move(fitted)).first->second;
}

}  // namespace

GroundTruth ground_truth(const Env& env, const FittedSoftQConfig& expert) {
    GroundTruth gt;
    if (const auto* mdp = std::get_if<TabularMdp>(&env)) {
        auto sol = std::make_shared<const SoftSolution>(solve_soft(*mdp, 1e-12));
        if (!sol->converged) throw std::runtime_error("soft value iteration did not converge");
        auto reward = std::make_shared<const Matrix>(mdp->reward);
        gt.reward = [reward](StateView s, int a) { return (*reward)(state_index(s), a); };
        gt.q = [sol](StateView s, int a) { return sol->q(state_index(s), a); };
        gt.v = [sol](StateView s) { return sol->v(state_index(s)); };
        gt.policy = [sol](StateView s) {
            const int i = state_index(s);
            std::vector<double> row(static_cast<std::size_t>(sol->policy.cols()));
            for (std::size_t a = 0; a < row.size(); ++a) row[a] = sol->policy(i, static_cast<Eigen::Index>(a));
            return row;
        };
        gt.policy_estimate = std::make_shared<const PolicyEstimate>(exact_policy(*sol));
        gt.descriptor = {{"kind", "soft-value-iteration"}, {"residual", sol->residual},
                         {"iterations", sol->iterations}};
        return gt;
    }
    const auto& syn = std::get<SyntheticMdp>(env);
    auto fitted = cached_expert(syn, expert);
    gt.reward = [syn](StateView s, int a) { return synthetic_reward(syn, s, a); };
    gt.q = [fitted](StateView s, int a) { return fitted->q(s, a); };
    gt.v = [fitted](StateView s) { return fitted->v(s); };
    gt.policy = [fitted](StateView s) { return fitted->policy(s); };
    gt.policy_estimate = std::make_shared<const PolicyEstimate>(exact_policy(fitted));
    gt.descriptor = {{"kind", "fitted-soft-q"},
                     {"config", expert.to_json()},
                     {"heldout_residual", fitted->heldout_residual},
                     {"final_round_loss", fitted->round_losses.empty() ? 0.0 : fitted->round_losses.back()}};
    return gt;
}

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("env")) c.env = j["env"];
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        c.T = d.value("T", c.T);
        if (d.contains("seed")) c.data_seed = d["seed"].get<std::uint64_t>();
        c.dataset_path = d.value("path", std::string());
    }
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    nlohmann::json pq = j.value("pqr", nlohmann::json::object());
    if (!c.env.is_null()) {
        const Env env = env_from_json(c.env);
        if (!pq.contains("gamma")) pq["gamma"] = env_gamma(env);
        if (!pq.contains("alpha")) pq["alpha"] = env_alpha(env);
    }
    c.pqr = PqrConfig::from_json(pq);
    if (j.contains("expert")) c.expert = FittedSoftQConfig::from_json(j["expert"]);
    c.exact_policy = j.value("exact_policy", c.exact_policy);
    c.sensitivity_override = j.value("sensitivity_override", c.sensitivity_override);
    if (j.contains("evaluation")) {
        const auto& e = j["evaluation"];
        if (e.is_string()) {
            c.evaluation = e.get<std::string>();
        } else {
            c.evaluation = e.value("kind", c.evaluation);
            c.grid_states = e.value("grid_states", c.grid_states);
        }
    }
    if (j.contains("output")) {
        c.csv_path = j["output"].value("csv", std::string());
        c.manifest_path = j["output"].value("manifest", std::string());
    }
    c.report_runtime = j.value("report_runtime", c.report_runtime);
    c.seed = j.value("seed", c.seed);
    if (!j.contains("pqr") || !j["pqr"].contains("seed")) c.pqr.seed = derive_seed(c.seed, 21);
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json d{{"T", T}};
    if (data_seed) d["seed"] = *data_seed;
    if (!dataset_path.empty()) d["path"] = dataset_path;
    return {{"env", env},
            {"dataset", d},
            {"methods", methods},
            {"pqr", pqr.to_json()},
            {"expert", expert.to_json()},
            {"exact_policy", exact_policy},
            {"sensitivity_override", sensitivity_override},
            {"evaluation", {{"kind", evaluation}, {"grid_states", grid_states}}},
            {"output", {{"csv", csv_path}, {"manifest", manifest_path}}},
            {"report_runtime", report_runtime},
            {"seed", seed}};
}

void ExperimentConfig::validate() const {
    if (env.is_null() && dataset_path.empty()) throw std::invalid_argument("config needs an env or a dataset path");
    if (dataset_path.empty() && T < 1) throw std::invalid_argument("dataset T must be >= 1");
    if (methods.empty()) throw std::invalid_argument("config lists no methods");
    for (const auto& m : methods)
        if (m != "pqr" && m != "maxent" && m != "splgd") throw std::invalid_argument("unknown method '" + m + "'");
    if (evaluation != "dataset" && evaluation != "grid")
        throw std::invalid_argument("evaluation must be \"dataset\" or \"grid\"");
    if (!env.is_null() && !sensitivity_override) {
        const Env e = env_from_json(env);
        if (pqr.gamma != env_gamma(e) || pqr.alpha != env_alpha(e))
            throw std::invalid_argument(
                "method gamma/alpha differ from the data-generating values; set sensitivity_override to allow");
    }
}

// ---------------------------------------------------------------------------
// Reporting

bool MetricsReport::has_failure() const {
    return std::any_of(rows.begin(), rows.end(), [](const MetricsRow& r) { return !r.ok; });
}

const MetricsRow* MetricsReport::find(const std::string& method) const {
    for (const auto& r : rows)
        if (r.method == method) return &r;
    return nullptr;
}

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{"method",       "env",   "p",     "T",         "gamma_data",
                                               "gamma_method", "alpha_data", "alpha_method", "mse_r",
                                               "mse_q",        "runtime_s",  "seed"};
    return cols;
}

std::string csv_header() {
    std::string out;
    for (const auto& c : csv_columns()) out += (out.empty() ? "" : ",") + c;
    return out;
}

namespace {

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string format_csv_row(const MetricsRow& r) {
    return r.method + "," + r.env + "," + std::to_string(r.p) + "," + std::to_string(r.T) + "," + num(r.gamma_data) +
           "," + num(r.gamma_method) + "," + num(r.alpha_data) + "," + num(r.alpha_method) + "," + num(r.mse_r) + "," +
           num(r.mse_q) + "," + num(r.runtime_s) + "," + std::to_string(r.seed);
}

void write_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << csv_header() << '\n';
    for (const auto& r : rows) out << format_csv_row(r) << '\n';
}

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

double max_abs_at_anchor(const StateActionFn& f, const EvalSet& eval_set, int anchor) {
    double m = 0.0;
    for (const auto& [s, a] : eval_set) m = std::max(m, std::abs(f(s, anchor)));
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiments

MetricsReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    MetricsReport report;
    nlohmann::json failures = nlohmann::json::array();
    nlohmann::json methods = nlohmann::json::object();

    TrajectoryDataset ds;
    Env env = cfg.env.is_null() ? Env{} : env_from_json(cfg.env);
    GroundTruth truth;
    EvalSet eval_set;

    MetricsRow base;
    base.gamma_method = cfg.pqr.gamma;
    base.alpha_method = cfg.pqr.alpha;
    base.seed = cfg.seed;

    auto fail_all = [&](const std::string& stage, const std::string& what) {
        for (const auto& m : cfg.methods) {
            MetricsRow r = base;
            r.method = m;
            r.mse_r = r.mse_q = kNaN;
            r.ok = false;
            r.stage = stage;
            r.error = what;
            report.rows.push_back(r);
            failures.push_back({{"method", m}, {"stage", stage}, {"error", what}});
        }
    };

    try {
        if (!cfg.dataset_path.empty()) {
            ds = load_dataset(cfg.dataset_path);
            if (cfg.env.is_null()) env = env_from_json(ds.meta.env);
            ds.validate(env);
        }
        truth = ground_truth(env, cfg.expert);
        if (cfg.dataset_path.empty())
            ds = rollout(env, truth.policy, cfg.T, cfg.dataset_seed(), truth.descriptor);
        eval_set = cfg.evaluation == "grid" ? grid_eval_set(env, cfg.grid_states, derive_seed(cfg.seed, 40))
                                            : dataset_eval_set(ds);
    } catch (const std::exception& e) {
        base.env = cfg.env.is_null() ? std::string("unknown") : env_name(env);
        fail_all("data", e.what());
        report.manifest = {{"config", cfg.to_json()}, {"failures", failures}};
        if (!cfg.csv_path.empty()) write_csv(cfg.csv_path, report.rows);
        if (!cfg.manifest_path.empty()) write_json(cfg.manifest_path, report.manifest);
        return report;
    }

    base.env = env_name(env);
    base.p = state_dim(env);
    base.T = static_cast<long>(ds.size());
    base.gamma_data = env_gamma(env);
    base.alpha_data = env_alpha(env);
    const int anchor = cfg.pqr.anchor_action;
    using clock = std::chrono::steady_clock;
    auto seconds = [&](clock::time_point t0) {
        return cfg.report_runtime ? std::chrono::duration<double>(clock::now() - t0).count() : 0.0;
    };

    std::shared_ptr<const PolicyEstimate> shared_policy;
    auto policy_for_baselines = [&]() {
        if (shared_policy) return shared_policy;
        if (cfg.exact_policy) return truth.policy_estimate;
        PolicyFitConfig pc = cfg.pqr.policy_fit;
        pc.trainer.seed = derive_seed(cfg.pqr.seed, 1);
        pc.trainer.clip_floor = cfg.pqr.clip_floor;
        shared_policy = std::make_shared<const PolicyEstimate>(fit_policy_mle(ds, env, pc));
        return shared_policy;
    };

    for (const auto& m : cfg.methods) {
        MetricsRow row = base;
        row.method = m;
        row.mse_q = kNaN;
        const auto t0 = clock::now();
        try {
            if (m == "pqr") {
                auto run = pqr_full(ds, cfg.pqr, env, cfg.exact_policy ? truth.policy_estimate : nullptr);
                shared_policy = run.policy;
                const QEstimate q = run.fqi.q;
                row.runtime_s = seconds(t0);
                row.mse_r = evaluate_mse(run.reward.reward, truth.reward, eval_set);
                row.mse_q = evaluate_mse([&q](StateView s, int a) { return q.q_value(s, a); }, truth.q, eval_set);
                methods[m] = run.manifest;
            } else if (m == "maxent") {
                std::string stage = "policy";
                try {
                    auto policy = policy_for_baselines();
                    stage = "grounding";
                    const State ref = reference_state(env);
                    const auto grounded = maxent_irl_grounded(policy, cfg.pqr.alpha, truth.q(ref, 0), ref, 0);
                    const auto q_hat = grounded.as_function();
                    const auto r_hat = normalize_by_anchor(q_hat, anchor);
                    row.runtime_s = seconds(t0);
                    row.mse_r = evaluate_mse(r_hat, truth.reward, eval_set);
                    row.mse_q = evaluate_mse(q_hat, truth.q, eval_set);
                    methods[m] = {{"offset", grounded.offset},
                                  {"reference_state", ref},
                                  {"reference_action", 0},
                                  {"q_ref", truth.q(ref, 0)},
                                  {"max_abs_reward_at_anchor", max_abs_at_anchor(r_hat, eval_set, anchor)}};
                } catch (const StageError&) {
                    throw;
                } catch (const std::exception& e) {
                    throw StageError(stage, e.what());
                }
            } else {
                SplGdResult fit;
                try {
                    fit = spl_gd(ds, truth.q, truth.v, cfg.pqr.gamma);
                } catch (const std::exception& e) {
                    throw StageError("regression", e.what());
                }
                const auto r_hat = normalize_by_anchor(fit.reward, anchor);
                row.runtime_s = seconds(t0);
                row.mse_r = evaluate_mse(r_hat, truth.reward, eval_set);
                nlohmann::json coef = nlohmann::json::object();
                for (std::size_t i = 0; i < fit.names.size(); ++i)
                    coef[fit.names[i]] = fit.coefficients(static_cast<Eigen::Index>(i));
                methods[m] = {{"coefficients", coef},
                              {"max_abs_reward_at_anchor", max_abs_at_anchor(r_hat, eval_set, anchor)}};
            }
        } catch (const StageError& e) {
            row.ok = false;
            row.stage = e.stage();
            row.error = e.what();
        } catch (const std::exception& e) {
            row.ok = false;
            row.stage = m;
            row.error = e.what();
        }
        if (!row.ok) {
            row.mse_r = row.mse_q = kNaN;
            row.runtime_s = seconds(t0);
            failures.push_back({{"method", m}, {"stage", row.stage}, {"error", row.error}});
        }
        report.rows.push_back(row);
    }

    report.manifest = {{"config", cfg.to_json()},
                       {"env", env_to_json(env)},
                       {"dataset", {{"seed", ds.meta.seed}, {"T", ds.meta.length}, {"policy", ds.meta.policy}}},
                       {"truth", truth.descriptor},
                       {"evaluation", {{"kind", cfg.evaluation}, {"points", eval_set.size()}}},
                       {"normalization", "non-PQR reward estimates are anchor-normalized before scoring"},
                       {"methods", methods},
                       {"failures", failures}};
    if (!cfg.csv_path.empty()) write_csv(cfg.csv_path, report.rows);
    if (!cfg.manifest_path.empty()) write_json(cfg.manifest_path, report.manifest);
    return report;
}

ExperimentConfig apply_axis(ExperimentConfig cfg, const std::string& axis, double value) {
    if (axis == "T") {
        if (value < 1) throw std::invalid_argument("T must be >= 1");
        cfg.T = static_cast<long>(value);
        return cfg;
    }
    if (cfg.env.is_null()) throw std::invalid_argument("sweep axis '" + axis + "' needs an env in the template");
    if (axis == "p") {
        if (!cfg.env.contains("p")) throw std::invalid_argument("axis p applies to the synthetic env only");
        cfg.env["p"] = static_cast<int>(value);
        cfg.env.erase("omega");
    } else if (axis == "gamma") {
        cfg.env["gamma"] = value;
        cfg.sensitivity_override = true;
    } else if (axis == "alpha") {
        cfg.env["alpha"] = value;
        cfg.sensitivity_override = true;
    } else {
        throw std::invalid_argument("unknown sweep axis '" + axis + "' (expected p, gamma, alpha or T)");
    }
    env_from_json(cfg.env);
    return cfg;
}

std::vector<MetricsReport> sweep(const ExperimentConfig& tmpl, const std::string& axis,
                                 const std::vector<double>& values, int workers) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    workers = std::max(1, workers);

    auto run_point = [&](std::size_t i) {
        ExperimentConfig cfg = tmpl;
        cfg.seed = tmpl.seed + i;
        cfg.pqr.seed = derive_seed(cfg.seed, 21);
        cfg.csv_path.clear();
        cfg.manifest_path.clear();
        try {
            return run_experiment(apply_axis(cfg, axis, values[i]));
        } catch (const std::exception& e) {
            MetricsReport r;
            for (const auto& m : cfg.methods) {
                MetricsRow row;
                row.method = m;
                row.seed = cfg.seed;
                row.T = cfg.T;
                row.mse_r = row.mse_q = kNaN;
                row.ok = false;
                row.stage = "config";
                row.error = e.what();
                r.rows.push_back(row);
            }
            r.manifest = {{"axis", axis}, {"value", values[i]},
                          {"failures", {{{"stage", "config"}, {"error", e.what()}}}}};
            return r;
        }
    };

    std::vector<MetricsReport> out(values.size());
    for (std::size_t start = 0; start < values.size(); start += static_cast<std::size_t>(workers)) {
        const std::size_t stop = std::min(values.size(), start + static_cast<std::size_t>(workers));
        std::vector<std::future<MetricsReport>> inflight;
        for (std::size_t i = start; i < stop; ++i)
            inflight.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, run_point, i));
        for (std::size_t i = start; i < stop; ++i) out[i] = inflight[i - start].get();
    }
    return out;
}

int robustness_anchor(std::uint64_t seed) {
    return static_cast<int>(derive_seed(seed, 30) % static_cast<std::uint64_t>(SyntheticMdp::n_actions));
}

MetricsReport robustness_experiment(ExperimentConfig cfg) {
    if (cfg.env.is_null() || !cfg.env.contains("p"))
        throw std::invalid_argument("robustness experiment needs a synthetic env");
    cfg.env["reward_kind"] = "state_only";
    cfg.methods = {"pqr", "splgd"};
    cfg.pqr.anchor_action = robustness_anchor(cfg.seed);
    cfg.pqr.anchor_reward = AnchorRewardSource::zero;
    auto report = run_experiment(cfg);
    report.manifest["robustness"] = {
        {"anchor_action", cfg.pqr.anchor_action},
        {"anchor_reward_assumed", 0.0},
        {"note", "reward is state-only; the anchor action's reward is not zero, so the anchor assumption is violated "
                 "by construction"},
        {"omitted_methods", {"D-AIRL"}}};
    if (!cfg.manifest_path.empty()) write_json(cfg.manifest_path, report.manifest);
    return report;
}

// ---------------------------------------------------------------------------
// Estimate interchange

nlohmann::json export_estimate(const std::string& method, const Env& env, const StateActionFn& reward,
                               const StateActionFn& q, const EvalSet& eval_set, int anchor_action) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [s, a] : eval_set) {
        nlohmann::json pt{{"s", s}, {"a", a}, {"r", reward(s, a)}};
        if (q) pt["q"] = q(s, a);
        points.push_back(std::move(pt));
    }
    return {{"format", "pqr-estimate/1"},
            {"method", method},
            {"env", env_to_json(env)},
            {"anchor_action", anchor_action},
            {"points", points}};
}

MetricsRow evaluate_estimate_json(const nlohmann::json& estimate, const Env& env, const FittedSoftQConfig& expert) {
    if (estimate.value("format", std::string()) != "pqr-estimate/1")
        throw std::invalid_argument("not a pqr-estimate/1 document");
    const auto& points = estimate.at("points");
    if (points.empty()) throw std::invalid_argument("estimate has no points");
    const auto truth = ground_truth(env, expert);
    MetricsRow row;
    row.method = estimate.value("method", std::string("unknown"));
    row.env = env_name(env);
    row.p = state_dim(env);
    row.gamma_data = env_gamma(env);
    row.alpha_data = env_alpha(env);
    row.gamma_method = kNaN;
    row.alpha_method = kNaN;
    double er = 0.0, eq = 0.0;
    bool has_q = true;
    for (const auto& pt : points) {
        const State s = pt.at("s").get<State>();
        const int a = pt.at("a").get<int>();
        if (!env_contains(env, s) || a < 0 || a >= env_n_actions(env))
            throw std::invalid_argument("estimate point outside the environment");
        const double dr = pt.at("r").get<double>() - truth.reward(s, a);
        er += dr * dr;
        if (pt.contains("q")) {
            const double dq = pt["q"].get<double>() - truth.q(s, a);
            eq += dq * dq;
        } else {
            has_q = false;
        }
    }
    const auto n = static_cast<double>(points.size());
    row.T = static_cast<long>(points.size());
    row.mse_r = er / n;
    row.mse_q = has_q ? eq / n : kNaN;
    return row;
}

}  // namespace pqr
