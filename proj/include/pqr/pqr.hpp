#pragma once

#include "pqr/demos.hpp"
#include "pqr/policy.hpp"

#include <memory>
#include <optional>

namespace pqr {

/// How conditional expectations E[. | s, a] are obtained.
enum class ExpectationMode {
    known_transition,  // sum over the tabular transition row
    tabular_average,   // per-state (or per state-action) mean of the sample targets
    net,               // two-layer ReLU regression
};

std::string to_string(ExpectationMode m);
ExpectationMode expectation_mode_from(const std::string& s);

/**
 * Q estimate assembled from a policy and an anchor-action value:
 *   q(s, a) = alpha * (log pi(s, a) - log pi(s, a_A)) + anchor(s).
 * At a = a_A the log difference is exactly zero, so q(s, a_A) == anchor(s)
 * bitwise.
 */
class QEstimate {
public:
    QEstimate(std::shared_ptr<const PolicyEstimate> policy, StateFn anchor_component, double alpha,
              int anchor_action);

    /// A fixed table (used to feed shaped or oracle Q-functions to the reward
    /// estimator). anchor_component(s) = table(s, a_A).
    static QEstimate from_table(Matrix table, double alpha, int anchor_action);

    double q_value(StateView s, int a) const;
    double anchor_component(StateView s) const { return anchor_(s); }
    int anchor_action() const { return anchor_action_; }
    double alpha() const { return alpha_; }
    const PolicyEstimate* policy() const { return policy_.get(); }

private:
    std::shared_ptr<const PolicyEstimate> policy_;
    std::shared_ptr<const Matrix> table_;
    StateFn anchor_;
    double alpha_;
    int anchor_action_;
};

/// Same construction as the QEstimate constructor, named after the operation.
QEstimate q_estimator(std::shared_ptr<const PolicyEstimate> policy, StateFn anchor_values, double alpha,
                      int anchor_action);

struct AnchorSolution {
    Vector values;
    double residual = 0.0;
    long iterations = 0;
    bool converged = false;
};

/// Fixed point of f <- g + gamma * P_A (-alpha log pi(., a_A) + f) from f = 0,
/// with known transitions; g is the MDP's anchor reward column unless given.
AnchorSolution solve_qa_exact(const TabularMdp& mdp, const PolicyEstimate& policy, double tol = 1e-10,
                              long max_iter = 1'000'000, std::optional<Vector> anchor_reward = std::nullopt,
                              std::optional<double> gamma = std::nullopt,
                              std::optional<double> alpha = std::nullopt);

struct FqiConfig {
    double gamma = 0.9;
    double alpha = 1.0;
    int rounds = 0;  // 0: smallest N with gamma^N * 2 R / (1 - gamma) < 1e-3
    int anchor_action = 0;
    StateFn anchor_reward;  // g(s); empty means g = 0
    ExpectationMode mode = ExpectationMode::net;
    TrainerConfig trainer;
    double fixed_point_tol = 1e-12;  // known_transition mode with rounds = 0
};

struct FqiRound {
    int round = 0;
    double train_loss = 0.0;
    double max_abs_target = 0.0;
    double anchor_change = 0.0;  // sup |h_k - h_{k-1}| over anchor-transition states
};

struct FqiResult {
    QEstimate q;
    std::vector<FqiRound> rounds;
    long anchor_transitions = 0;
};

/// Smallest N >= 1 with gamma^N * 2 * max_abs_target / (1 - gamma) < 1e-3.
int default_fqi_rounds(double gamma, double max_abs_target);

/// Fitted Q iteration restricted to anchor-action transitions. Throws
/// std::invalid_argument when the dataset has no anchor transition.
FqiResult fqi_identify(const TrajectoryDataset& ds, std::shared_ptr<const PolicyEstimate> policy,
                       const FqiConfig& config, const Env& env);

struct RewardConfig {
    double gamma = 0.9;
    double alpha = 1.0;
    ExpectationMode mode = ExpectationMode::net;
    TrainerConfig trainer;
};

/// r_hat(s, a) = q(s, a) - gamma * h(s, a), h the fitted E[V_hat(s') | s, a].
struct RewardEstimate {
    StateActionFn reward;
    StateActionFn expectation_model;
    nlohmann::json provenance;
    double train_loss = 0.0;

    double operator()(StateView s, int a) const { return reward(s, a); }
    Matrix tabulate(int n_states, int n_actions) const;
};

/// Reward estimation from a Q estimate and the policy. With gamma = 0 the
/// expectation model is never consulted and r_hat = q exactly.
RewardEstimate reward_estimation(const TrajectoryDataset& ds, const QEstimate& q, const PolicyEstimate& policy,
                                 const RewardConfig& config, const Env& env);

enum class AnchorRewardSource { zero, env };

struct PqrConfig {
    double gamma = 0.9;
    double alpha = 1.0;
    int rounds = 0;
    int anchor_action = 0;
    AnchorRewardSource anchor_reward = AnchorRewardSource::env;
    ExpectationMode mode = ExpectationMode::net;
    PolicyFitConfig policy_fit;
    TrainerConfig q_trainer{.hidden_width = 16, .learning_rate = 3e-2, .iterations = 1000, .seed = 0};
    TrainerConfig reward_trainer{.hidden_width = 16, .learning_rate = 3e-2, .iterations = 1000, .seed = 0};
    double clip_floor = 1e-6;
    std::uint64_t seed = 0;
    double fixed_point_tol = 1e-12;

    nlohmann::json to_json() const;
    static PqrConfig from_json(const nlohmann::json& j);
};

struct PqrRun {
    std::shared_ptr<const PolicyEstimate> policy;
    FqiResult fqi;
    RewardEstimate reward;
    nlohmann::json manifest;
};

/// Policy step, FQI-I, then reward estimation. `policy_override` skips the
/// policy step (exact-policy passthrough). Stage failures are rethrown as
/// StageError tagged "policy", "fqi" or "reward".
PqrRun pqr_full(const TrajectoryDataset& ds, const PqrConfig& config, const Env& env,
                std::shared_ptr<const PolicyEstimate> policy_override = nullptr);

/// r + phi(s) - gamma * E[phi(s') | s, a], computed with known transitions.
Matrix shaping_probe(const TabularMdp& mdp, const Vector& phi);

Matrix tabulate(const StateActionFn& f, int n_states, int n_actions);

/// Net input features: s/p for synthetic states, one-hot for tabular ones.
std::vector<double> state_features(const Env& env, StateView s);
std::vector<double> state_action_features(const Env& env, StateView s, int a);

}  // namespace pqr
