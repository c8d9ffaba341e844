#pragma once

#include "pqr/baselines.hpp"

#include <filesystem>

namespace pqr {

struct StateAction {
    State s;
    int a = 0;
};

using EvalSet = std::vector<StateAction>;

/// Mean squared difference over the evaluation set.
double evaluate_mse(const StateActionFn& estimate, const StateActionFn& truth, const EvalSet& eval_set);

/// Empirical (s_t, a_t) pairs of the dataset.
EvalSet dataset_eval_set(const TrajectoryDataset& ds);
/// Every (s, a) of a tabular env; for the synthetic env, n_states uniform box
/// states crossed with all actions.
EvalSet grid_eval_set(const Env& env, int n_states, std::uint64_t seed);

/// Reward, Q and V of the demonstrating expert plus the expert policy.
struct GroundTruth {
    StateActionFn reward;
    StateActionFn q;
    StateFn v;
    PolicyFn policy;
    std::shared_ptr<const PolicyEstimate> policy_estimate;  // exact passthrough
    nlohmann::json descriptor;
};

/// Tabular: soft value iteration to 1e-12. Synthetic: the fitted soft-Q
/// expert, memoized per (env, expert config) within the process.
GroundTruth ground_truth(const Env& env, const FittedSoftQConfig& expert);

struct ExperimentConfig {
    nlohmann::json env;
    long T = 20000;
    std::optional<std::uint64_t> data_seed;  // default: derived from seed
    std::string dataset_path;                // load instead of generating when set
    std::vector<std::string> methods{"pqr", "maxent", "splgd"};
    PqrConfig pqr;
    FittedSoftQConfig expert;
    bool exact_policy = false;          // pass the expert policy through instead of fitting
    bool sensitivity_override = false;  // allow method gamma/alpha to differ from the data
    std::string evaluation = "dataset";  // "dataset" | "grid"
    int grid_states = 500;
    std::string csv_path;
    std::string manifest_path;
    bool report_runtime = true;
    std::uint64_t seed = 0;

    /// Missing pqr.gamma / pqr.alpha are taken from the env.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
    std::uint64_t dataset_seed() const { return data_seed.value_or(derive_seed(seed, 20)); }
};

struct MetricsRow {
    std::string method;
    std::string env;
    int p = 0;
    long T = 0;
    double gamma_data = 0.0;
    double gamma_method = 0.0;
    double alpha_data = 0.0;
    double alpha_method = 0.0;
    double mse_r = 0.0;
    double mse_q = 0.0;  // NaN when the method has no Q estimate
    double runtime_s = 0.0;
    std::uint64_t seed = 0;

    bool ok = true;
    std::string stage;  // failing stage when !ok
    std::string error;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;
    nlohmann::json manifest;

    bool has_failure() const;
    const MetricsRow* find(const std::string& method) const;
};

const std::vector<std::string>& csv_columns();
std::string csv_header();
std::string format_csv_row(const MetricsRow& row);
void write_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

/// Generate or load data, run each method, anchor-normalize every non-PQR
/// reward estimate, evaluate. Writes csv_path / manifest_path when set.
/// Method failures are recorded in the row and the manifest; other methods
/// still run.
MetricsReport run_experiment(const ExperimentConfig& cfg);

/// One run per axis value, seed = template seed + index, up to `workers`
/// points in flight. Failures stay isolated to their point.
std::vector<MetricsReport> sweep(const ExperimentConfig& tmpl, const std::string& axis,
                                 const std::vector<double>& values, int workers = 1);

/// Axis value applied to a copy of the template (without the seed change).
ExperimentConfig apply_axis(ExperimentConfig cfg, const std::string& axis, double value);

/// State-only synthetic reward, PQR with a seed-chosen anchor and g = 0,
/// plus SPL-GD.
MetricsReport robustness_experiment(ExperimentConfig cfg);
/// Anchor action used by robustness_experiment for a given seed.
int robustness_anchor(std::uint64_t seed);

/// Reward (and optional Q) values of an estimate on an evaluation set, in
/// the interchange format read by evaluate_estimate_json.
nlohmann::json export_estimate(const std::string& method, const Env& env, const StateActionFn& reward,
                               const StateActionFn& q, const EvalSet& eval_set, int anchor_action);

/// Scores an exported estimate against the env's true reward and Q.
MetricsRow evaluate_estimate_json(const nlohmann::json& estimate, const Env& env, const FittedSoftQConfig& expert);

}  // namespace pqr
