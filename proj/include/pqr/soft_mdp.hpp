#pragma once

#include "pqr/common.hpp"
#include "pqr/net.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <variant>

namespace pqr {

/**
 * Finite MDP with an entropy temperature and a designated anchor action.
 *
 * The transition tensor is stored flat, indexed [s][a][s']. The anchor reward
 * g(s) is always the reward column of the anchor action, so the anchor
 * assumption holds by construction.
 */
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // n_states * n_actions * n_states
    Matrix reward;                   // n_states x n_actions
    double gamma = 0.9;
    double alpha = 1.0;
    int anchor_action = 0;

    /// Validates shapes, probabilities and parameter ranges; throws
    /// std::invalid_argument on violation.
    static TabularMdp make(int n_states, int n_actions, std::vector<double> transition,
                           Matrix reward, double gamma, double alpha, int anchor_action = 0);

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    std::span<const double> row(int s, int a) const {
        return {transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }
    Vector anchor_reward() const { return reward.col(anchor_action); }

    /// E[f(s') | s, a] by summing the transition row.
    double expect(int s, int a, const Vector& f) const;

    void validate() const;
};

enum class SyntheticReward {
    standard,    // a * tanh([s/p, a/4] . w) / (4 * 1'w); zero at a = 0
    state_only,  // tanh([s/p, a/4] . w), the misspecified robustness variant
};

/// Continuous-state benchmark: box [-p, p]^p, actions {0..4}, anchor 0.
struct SyntheticMdp {
    static constexpr int n_actions = 5;

    int p = 5;
    std::vector<double> omega;  // length p + 1
    double gamma = 0.9;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    SyntheticReward reward_kind = SyntheticReward::standard;

    /// Draws omega uniformly on (0,1)^{p+1} from the seed.
    static SyntheticMdp make(int p, std::uint64_t seed, double gamma = 0.9, double alpha = 1.0,
                             SyntheticReward kind = SyntheticReward::standard);

    bool contains(StateView s) const;
    void validate() const;
};

/// Q, V and the energy-based policy of a solved tabular MDP.
struct SoftSolution {
    Matrix q;
    Vector v;
    Matrix policy;
    double residual = 0.0;
    long iterations = 0;
    bool converged = false;
};

/// One application of the entropy-regularized Bellman operator.
Matrix soft_bellman_backup(const TabularMdp& mdp, const Matrix& q);

/// Row-wise soft maximum alpha * log sum_a exp(q / alpha).
Vector soft_value(const Matrix& q, double alpha);

/// Row-wise softmax of q / alpha.
Matrix soft_policy(const Matrix& q, double alpha);

/// Value iteration from Q = 0 until the sup-norm residual drops below tol.
/// A non-converged result is returned with converged = false.
SoftSolution solve_soft(const TabularMdp& mdp, double tol = 1e-10, long max_iter = 1'000'000);

double synthetic_reward(const SyntheticMdp& env, StateView s, int a);

/// Drift step s + a/5 - 0.5 if the whole vector stays in the box, otherwise a
/// uniform redraw of the full state.
State synthetic_step(const SyntheticMdp& env, StateView s, int a, Rng& rng);

State sample_box_state(const SyntheticMdp& env, Rng& rng);

// ---------------------------------------------------------------------------
// Fitted soft-Q expert for the synthetic environment.

struct FittedSoftQConfig {
    int train_states = 2000;      // sampled states for the value regression
    int reference_states = 1000;  // uniform box sample for the reset-branch expectation
    int rounds = 60;
    int heldout_states = 200;
    double residual_threshold = 5e-3;  // held-out mean squared Bellman residual
    TrainerConfig trainer{.hidden_width = 64, .learning_rate = 1e-2, .iterations = 300, .seed = 0};
    int warm_iterations = 100;  // per round after the first; the net is warm-started

    nlohmann::json to_json() const;
    static FittedSoftQConfig from_json(const nlohmann::json& j);
};

/**
 * Approximate soft Q-function of a SyntheticMdp.
 *
 * A two-layer ReLU net V(s/p) is fitted by soft value iteration. Q is the
 * exact one-step lookahead through the known dynamics:
 *   Q(s, a) = r(s, a) + gamma * (V(s + drift_a) if inside the box, else Vbar)
 * with Vbar the box average of V. The policy is softmax(Q / alpha).
 */
class FittedSoftQ {
public:
    FittedSoftQ(SyntheticMdp env, TwoLayerReluNet value_net, double reset_value)
        : env_(std::move(env)), net_(std::move(value_net)), reset_value_(reset_value) {}

    double q(StateView s, int a) const;
    std::vector<double> q_row(StateView s) const;
    /// alpha * logsumexp(Q(s, .) / alpha)
    double v(StateView s) const;
    std::vector<double> policy(StateView s) const;
    std::vector<double> log_policy(StateView s) const;

    double value_net(StateView s) const;
    double reset_value() const { return reset_value_; }

    /// n uniform box states from a seed.
    static std::vector<State> reference_sample(const SyntheticMdp& env, int n, std::uint64_t seed);

    const SyntheticMdp& env() const { return env_; }
    const TwoLayerReluNet& net() const { return net_; }

    std::vector<double> round_losses;
    double heldout_residual = 0.0;  // mean squared soft Bellman residual of Q

    nlohmann::json to_json() const;
    static FittedSoftQ from_json(const nlohmann::json& j);

private:
    SyntheticMdp env_;
    TwoLayerReluNet net_;
    double reset_value_;
};

std::vector<double> synthetic_features(const SyntheticMdp& env, StateView s, int a);

FittedSoftQ fitted_soft_q(const SyntheticMdp& env, const FittedSoftQConfig& config);

// ---------------------------------------------------------------------------
// Environment variant shared by rollout, pipelines and the harness.

using Env = std::variant<TabularMdp, SyntheticMdp>;

int env_n_actions(const Env& env);
double env_gamma(const Env& env);
double env_alpha(const Env& env);
bool env_contains(const Env& env, StateView s);
State env_initial_state(const Env& env, Rng& rng);
State env_step(const Env& env, StateView s, int a, Rng& rng);
double env_reward(const Env& env, StateView s, int a);
std::string env_name(const Env& env);

inline int state_index(StateView s) { return static_cast<int>(s[0]); }

nlohmann::json to_json(const TabularMdp& mdp);
nlohmann::json to_json(const SyntheticMdp& env);
nlohmann::json env_to_json(const Env& env);
TabularMdp tabular_from_json(const nlohmann::json& j);
SyntheticMdp synthetic_from_json(const nlohmann::json& j);
/// Dispatches on the presence of "n_states" (tabular) or "p" (synthetic).
Env env_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SoftSolution& sol);

}  // namespace pqr
