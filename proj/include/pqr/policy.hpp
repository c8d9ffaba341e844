#pragma once

#include "pqr/demos.hpp"
#include "pqr/net.hpp"
#include "pqr/soft_mdp.hpp"

#include <memory>
#include <optional>

namespace pqr {

enum class PolicyRepresentation { tabular, softmax_net, exact };

std::string to_string(PolicyRepresentation r);

/// max(logp, log clip_floor)
double clip_log_policy(double logp, double clip_floor);

/**
 * Estimated policy log pi_hat(s, a) with a clip floor.
 *
 * log_prob() is the clipped value used by every estimator downstream;
 * raw_log_probs() is the unclipped, normalized row.
 */
class PolicyEstimate {
public:
    using LogRowFn = std::function<std::vector<double>(StateView)>;

    PolicyEstimate(PolicyRepresentation rep, int n_actions, double clip_floor, LogRowFn rows);

    double log_prob(StateView s, int a) const;
    std::vector<double> raw_log_probs(StateView s) const;
    std::vector<double> probs(StateView s) const;

    PolicyRepresentation representation() const { return rep_; }
    int n_actions() const { return n_actions_; }
    double clip_floor() const { return clip_floor_; }

    /// Set when every record in the fitting data used the same action.
    bool single_action_warning = false;
    std::vector<double> loss_curve;  // softmax_net only

    /// Same estimate with a different clip floor.
    PolicyEstimate with_clip_floor(double clip_floor) const;

private:
    PolicyRepresentation rep_;
    int n_actions_;
    double clip_floor_;
    LogRowFn rows_;
};

struct PolicyFitConfig {
    TrainerConfig trainer{.hidden_width = 8, .learning_rate = 1e-2, .iterations = 1000, .seed = 0};
    double laplace = 1.0;  // tabular pseudo-count

    nlohmann::json to_json() const;
    static PolicyFitConfig from_json(const nlohmann::json& j);
};

/// Tabular env: Laplace-smoothed conditional frequencies (unvisited states
/// get the uniform row). Synthetic env: softmax over a two-layer ReLU logit
/// net on s/p, fitted by maximum likelihood.
PolicyEstimate fit_policy_mle(const TrajectoryDataset& ds, const Env& env, const PolicyFitConfig& config);

/// Passthrough of a known policy table (rows must be normalized).
PolicyEstimate exact_policy(const SoftSolution& sol, double clip_floor = 1e-6);
PolicyEstimate exact_policy(std::shared_ptr<const FittedSoftQ> expert, double clip_floor = 1e-6);

/// log pi_hat tabulated over a finite state space.
Matrix tabulate_log_policy(const PolicyEstimate& policy, int n_states);

}  // namespace pqr
