#pragma once

#include "pqr/pqr.hpp"

namespace pqr {

/// raw(s, a) + offset, where offset makes the value at the reference point
/// equal to the supplied ground truth.
struct GroundedEstimate {
    StateActionFn raw;
    double offset = 0.0;
    State reference_state;
    int reference_action = 0;

    double operator()(StateView s, int a) const { return raw(s, a) + offset; }
    StateActionFn as_function() const;
};

/// alpha * log pi_hat(s, a) with the per-state term left at zero, shifted so
/// the estimate at (reference_state, reference_action) equals q_ref.
GroundedEstimate maxent_irl_grounded(std::shared_ptr<const PolicyEstimate> policy, double alpha, double q_ref,
                                     State reference_state, int reference_action = 0);

/// Shift an existing estimate so it equals q_ref at the reference point.
GroundedEstimate ground(StateActionFn raw, double q_ref, State reference_state, int reference_action = 0);

struct SplGdResult {
    Vector coefficients;             // (s_1..s_p, a, 1)
    std::vector<std::string> names;  // column names, same order
    StateActionFn reward;
};

/// Linear features (s_1, ..., s_p, a, 1).
std::vector<double> splgd_features(StateView s, int a);

/// OLS of y_t = Q(s_t, a_t) - gamma * V(s_{t+1}) on (s, a, 1). Rejects a
/// rank-deficient design, naming the first dependent column.
SplGdResult spl_gd(const TrajectoryDataset& ds, const StateActionFn& q_oracle, const StateFn& v_oracle,
                   double gamma);

/// (s, a) -> f(s, a) - f(s, a_A)
StateActionFn normalize_by_anchor(StateActionFn estimate, int anchor_action);

struct AlphaSelection {
    double alpha_hat = 0.0;
    double estimated_total = 0.0;  // sum of r_hat at alpha = 1 over the records
    double reference_total = 0.0;  // r_avg * records
    PqrRun run;
};

/// Runs PQR at alpha = 1 with a zero anchor reward and returns
/// alpha_hat = r_avg * n / sum_t r_hat(s_t, a_t).
AlphaSelection select_alpha(const TrajectoryDataset& ds, double r_avg, double gamma, PqrConfig config, const Env& env,
                            std::shared_ptr<const PolicyEstimate> policy_override = nullptr);

}  // namespace pqr
