#include "pqr/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace pqr {

StateActionFn GroundedEstimate::as_function() const {
    return [raw = raw, offset = offset](StateView s, int a) { return raw(s, a) + offset; };
}

GroundedEstimate ground(StateActionFn raw, double q_ref, State reference_state, int reference_action) {
    if (!raw) throw std::invalid_argument("grounding needs an estimate");
    if (!std::isfinite(q_ref)) throw std::invalid_argument("reference value is not finite");
    const double at_ref = raw(reference_state, reference_action);
    if (!std::isfinite(at_ref)) throw std::invalid_argument("estimate is not evaluable at the reference point");
    GroundedEstimate g;
    g.offset = q_ref - at_ref;
    g.raw = std::move(raw);
    g.reference_state = std::move(reference_state);
    g.reference_action = reference_action;
    return g;
}

GroundedEstimate maxent_irl_grounded(std::shared_ptr<const PolicyEstimate> policy, double alpha, double q_ref,
                                     State reference_state, int reference_action) {
    if (!policy) throw std::invalid_argument("MaxEnt-IRL needs a policy estimate");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    if (reference_action < 0 || reference_action >= policy->n_actions())
        throw std::invalid_argument("reference action out of range");
    auto raw = [policy, alpha](StateView s, int a) { return alpha * policy->log_prob(s, a); };
    return ground(raw, q_ref, std::move(reference_state), reference_action);
}

std::vector<double> splgd_features(StateView s, int a) {
    std::vector<double> f(s.begin(), s.end());
    f.push_back(static_cast<double>(a));
    f.push_back(1.0);
    return f;
}

SplGdResult spl_gd(const TrajectoryDataset& ds, const StateActionFn& q_oracle, const StateFn& v_oracle,
                   double gamma) {
    if (ds.empty()) throw std::invalid_argument("SPL-GD needs a non-empty dataset");
    if (!q_oracle || !v_oracle) throw std::invalid_argument("SPL-GD needs Q and V oracles");
    const auto n = static_cast<Eigen::Index>(ds.size());
    const std::size_t p = ds.transitions.front().s.size();
    const auto k = static_cast<Eigen::Index>(p + 2);

    Matrix x(n, k);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& tr = ds.transitions[static_cast<std::size_t>(i)];
        if (tr.s.size() != p) throw std::invalid_argument("inconsistent state dimension in dataset");
        const auto f = splgd_features(tr.s, tr.a);
        for (Eigen::Index j = 0; j < k; ++j) x(i, j) = f[static_cast<std::size_t>(j)];
        y(i) = q_oracle(tr.s, tr.a) - gamma * v_oracle(tr.s_next);
    }
    if (!y.allFinite()) throw std::invalid_argument("SPL-GD targets are not finite");

    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) names.push_back("s" + std::to_string(j + 1));
    names.emplace_back("a");
    names.emplace_back("1");

    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    if (qr.rank() < k) {
        // columns pivoted past the rank are linear combinations of earlier ones
        Eigen::Index worst = k;
        for (Eigen::Index j = qr.rank(); j < k; ++j) worst = std::min<Eigen::Index>(worst, qr.colsPermutation().indices()(j));
        throw std::invalid_argument("SPL-GD design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                                    " of " + std::to_string(k) + "); dependent column '" +
                                    names[static_cast<std::size_t>(worst)] + "'");
    }

    SplGdResult res;
    res.coefficients = qr.solve(y);
    res.names = std::move(names);
    res.reward = [coef = res.coefficients](StateView s, int a) {
        const auto f = splgd_features(s, a);
        double v = 0.0;
        for (Eigen::Index j = 0; j < coef.size(); ++j) v += coef(j) * f[static_cast<std::size_t>(j)];
        return v;
    };
    return res;
}

StateActionFn normalize_by_anchor(StateActionFn estimate, int anchor_action) {
    return [f = std::move(estimate), anchor_action](StateView s, int a) { return f(s, a) - f(s, anchor_action); };
}

AlphaSelection select_alpha(const TrajectoryDataset& ds, double r_avg, double gamma, PqrConfig config, const Env& env,
                            std::shared_ptr<const PolicyEstimate> policy_override) {
    config.gamma = gamma;
    config.alpha = 1.0;
    config.anchor_reward = AnchorRewardSource::zero;
    AlphaSelection out{0.0, 0.0, 0.0, pqr_full(ds, config, env, std::move(policy_override))};
    for (const auto& tr : ds.transitions) out.estimated_total += out.run.reward(tr.s, tr.a);
    out.reference_total = r_avg * static_cast<double>(ds.size());
    if (std::abs(out.estimated_total) <= 1e-9 * static_cast<double>(ds.size()))
        throw std::invalid_argument("estimated total reward is zero; the alpha ratio is undefined");
    out.alpha_hat = out.reference_total / out.estimated_total;
    return out;
}

}  // namespace pqr
