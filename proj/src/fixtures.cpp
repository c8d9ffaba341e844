#include "pqr/fixtures.hpp"

namespace pqr {

TabularMdp mdp2x2(double gamma, double alpha) {
    Matrix r(2, 2);
    r << 0.0, 1.0, 0.0, 0.5;
    return TabularMdp::make(2, 2, std::vector<double>(8, 0.5), std::move(r), gamma, alpha, 0);
}

TabularMdp random_tabular(int n_states, int n_actions, std::uint64_t seed, double gamma, double alpha,
                          bool deterministic) {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("n_states and n_actions must be positive");
    Rng rng(seed);
    Matrix r(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) r(s, a) = 2.0 * uniform01(rng) - 1.0;
    std::vector<double> t(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            double* row = t.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states;
            if (deterministic) {
                row[std::min(n_states - 1, static_cast<int>(uniform01(rng) * n_states))] = 1.0;
                continue;
            }
            double total = 0.0;
            for (int k = 0; k < n_states; ++k) {
                row[k] = -std::log(1.0 - uniform01(rng));
                total += row[k];
            }
            for (int k = 0; k < n_states; ++k) row[k] /= total;
        }
    return TabularMdp::make(n_states, n_actions, std::move(t), std::move(r), gamma, alpha, 0);
}

TabularMdp fixture_from_json(const nlohmann::json& j) {
    const auto name = j.at("fixture").get<std::string>();
    const double gamma = j.value("gamma", name == "mdp2x2" ? 0.5 : 0.9);
    const double alpha = j.value("alpha", 1.0);
    if (name == "mdp2x2") return mdp2x2(gamma, alpha);
    if (name == "random") {
        auto mdp = random_tabular(j.value("n_states", 5), j.value("n_actions", 3), j.value("seed", std::uint64_t{0}),
                                  gamma, alpha, j.value("deterministic", false));
        if (j.value("zero_anchor_reward", false)) mdp.reward.col(mdp.anchor_action).setZero();
        return mdp;
    }
    throw std::invalid_argument("unknown fixture \"" + name + "\"");
}

}  // namespace pqr
