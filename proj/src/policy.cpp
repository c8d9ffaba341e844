#include "pqr/policy.hpp"

#include <algorithm>
#include <cmath>

namespace pqr {

std::string to_string(PolicyRepresentation r) {
    switch (r) {
        case PolicyRepresentation::tabular: return "tabular";
        case PolicyRepresentation::softmax_net: return "softmax-net";
        case PolicyRepresentation::exact: return "exact";
    }
    return "unknown";
}

double clip_log_policy(double logp, double clip_floor) { return std::max(logp, std::log(clip_floor)); }

PolicyEstimate::PolicyEstimate(PolicyRepresentation rep, int n_actions, double clip_floor, LogRowFn rows)
    : rep_(rep), n_actions_(n_actions), clip_floor_(clip_floor), rows_(std::move(rows)) {
    if (!(clip_floor > 0.0 && clip_floor < 1.0)) throw std::invalid_argument("clip floor must lie in (0, 1)");
    if (n_actions < 1) throw std::invalid_argument("policy needs at least one action");
}

std::vector<double> PolicyEstimate::raw_log_probs(StateView s) const { return rows_(s); }

double PolicyEstimate::log_prob(StateView s, int a) const {
    if (a < 0 || a >= n_actions_) throw std::invalid_argument("action out of range");
    return clip_log_policy(rows_(s)[static_cast<std::size_t>(a)], clip_floor_);
}

std::vector<double> PolicyEstimate::probs(StateView s) const {
    auto row = rows_(s);
    for (auto& x : row) x = std::exp(x);
    return row;
}

PolicyEstimate PolicyEstimate::with_clip_floor(double clip_floor) const {
    PolicyEstimate copy(rep_, n_actions_, clip_floor, rows_);
    copy.single_action_warning = single_action_warning;
    copy.loss_curve = loss_curve;
    return copy;
}

nlohmann::json PolicyFitConfig::to_json() const {
    return {{"trainer", trainer.to_json()}, {"laplace", laplace}};
}

PolicyFitConfig PolicyFitConfig::from_json(const nlohmann::json& j) {
    PolicyFitConfig c;
    if (j.contains("trainer")) c.trainer = TrainerConfig::from_json(j["trainer"]);
    c.laplace = j.value("laplace", c.laplace);
    if (!(c.laplace > 0.0)) throw std::invalid_argument("laplace pseudo-count must be > 0");
    return c;
}

namespace {

PolicyEstimate table_policy(PolicyRepresentation rep, Matrix log_table, double clip_floor) {
    const int n_states = static_cast<int>(log_table.rows());
    const int n_actions = static_cast<int>(log_table.cols());
    auto table = std::make_shared<const Matrix>(std::move(log_table));
    return PolicyEstimate(rep, n_actions, clip_floor, [table, n_states](StateView s) {
        const int idx = state_index(s);
        if (idx < 0 || idx >= n_states) throw std::invalid_argument("state index out of range");
        std::vector<double> row(static_cast<std::size_t>(table->cols()));
        for (Eigen::Index a = 0; a < table->cols(); ++a) row[static_cast<std::size_t>(a)] = (*table)(idx, a);
        return row;
    });
}

bool single_action(const TrajectoryDataset& ds) {
    return std::all_of(ds.transitions.begin(), ds.transitions.end(),
                       [&](const Transition& t) { return t.a == ds.transitions.front().a; });
}

}  // namespace

PolicyEstimate fit_policy_mle(const TrajectoryDataset& ds, const Env& env, const PolicyFitConfig& config) {
    if (ds.empty()) throw std::invalid_argument("policy estimation needs a non-empty dataset");
    const int n_actions = env_n_actions(env);
    const double clip = config.trainer.clip_floor;

    if (const auto* mdp = std::get_if<TabularMdp>(&env)) {
        Matrix counts = Matrix::Zero(mdp->n_states, n_actions);
        for (const auto& tr : ds.transitions) counts(state_index(tr.s), tr.a) += 1.0;
        Matrix logp(mdp->n_states, n_actions);
        for (int s = 0; s < mdp->n_states; ++s) {
            const double denom = counts.row(s).sum() + config.laplace * n_actions;
            for (int a = 0; a < n_actions; ++a) logp(s, a) = std::log((counts(s, a) + config.laplace) / denom);
        }
        auto est = table_policy(PolicyRepresentation::tabular, std::move(logp), clip);
        est.single_action_warning = single_action(ds);
        return est;
    }

    const auto& syn = std::get<SyntheticMdp>(env);
    Matrix x(syn.p, static_cast<Eigen::Index>(ds.size()));
    std::vector<int> labels;
    labels.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (int d = 0; d < syn.p; ++d)
            x(d, static_cast<Eigen::Index>(i)) = ds.transitions[i].s[static_cast<std::size_t>(d)] / syn.p;
        labels.push_back(ds.transitions[i].a);
    }
    auto trained = train_softmax(x, labels, n_actions, config.trainer);
    auto net = std::make_shared<const TwoLayerReluNet>(std::move(trained.net));
    const int p = syn.p;
    PolicyEstimate est(PolicyRepresentation::softmax_net, n_actions, clip, [net, p](StateView s) {
        std::vector<double> feat(static_cast<std::size_t>(p));
        for (int d = 0; d < p; ++d) feat[static_cast<std::size_t>(d)] = s[static_cast<std::size_t>(d)] / p;
        auto logits = net->predict_all(feat);
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - mx);
        const double lz = mx + std::log(z);
        for (auto& l : logits) l -= lz;
        return logits;
    });
    est.single_action_warning = single_action(ds);
    est.loss_curve = std::move(trained.loss_curve);
    return est;
}

PolicyEstimate exact_policy(const SoftSolution& sol, double clip_floor) {
    Matrix logp(sol.q.rows(), sol.q.cols());
    for (Eigen::Index s = 0; s < sol.q.rows(); ++s)
        for (Eigen::Index a = 0; a < sol.q.cols(); ++a) logp(s, a) = std::log(sol.policy(s, a));
    return table_policy(PolicyRepresentation::exact, std::move(logp), clip_floor);
}

PolicyEstimate exact_policy(std::shared_ptr<const FittedSoftQ> expert, double clip_floor) {
    return PolicyEstimate(PolicyRepresentation::exact, SyntheticMdp::n_actions, clip_floor,
                          [expert](StateView s) { return expert->log_policy(s); });
}

Matrix tabulate_log_policy(const PolicyEstimate& policy, int n_states) {
    Matrix out(n_states, policy.n_actions());
    for (int s = 0; s < n_states; ++s) {
        const State st{static_cast<double>(s)};
        const auto row = policy.raw_log_probs(st);
        for (int a = 0; a < policy.n_actions(); ++a) out(s, a) = row[static_cast<std::size_t>(a)];
    }
    return out;
}

}  // namespace pqr
