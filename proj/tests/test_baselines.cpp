#include "support.hpp"

using namespace pqr;
using test::max_abs;

namespace {

TabularMdp zero_anchor_mdp(double alpha, std::uint64_t seed) {
    auto mdp = random_tabular(5, 3, seed, 0.8, alpha);
    mdp.reward.col(0).setZero();
    return mdp;
}

PqrConfig known(const TabularMdp& mdp) {
    PqrConfig c;
    c.gamma = mdp.gamma;
    c.mode = ExpectationMode::known_transition;
    return c;
}

// random 2-d states and actions with independent successors
TrajectoryDataset random_records(int n, std::uint64_t seed, bool anchor_only = false) {
    Rng rng(seed);
    TrajectoryDataset ds;
    for (int i = 0; i < n; ++i) {
        State s{4.0 * uniform01(rng) - 2.0, 4.0 * uniform01(rng) - 2.0};
        State next{4.0 * uniform01(rng) - 2.0, 4.0 * uniform01(rng) - 2.0};
        const int a = anchor_only ? 0 : static_cast<int>(uniform01(rng) * 5);
        ds.transitions.push_back({i, 0, s, a, next});
    }
    return ds;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("MaxEnt-IRL with the exact policy equals Q at the reference state") {
    const auto mdp = random_tabular(4, 3, 7, 0.9, 0.6);
    const auto sol = solve_soft(mdp, 1e-12);
    const auto est = maxent_irl_grounded(test::exact(sol), mdp.alpha, sol.q(0, 0), State{0.0}, 0);
    for (int a = 0; a < 3; ++a) CHECK(std::abs(est(State{0.0}, a) - sol.q(0, a)) < 1e-8);
    CHECK(est(State{0.0}, 0) == doctest::Approx(sol.q(0, 0)).epsilon(1e-14));
}

TEST_CASE("MaxEnt-IRL scaling, zero offset and idempotent grounding") {
    const auto mdp = random_tabular(4, 3, 8);
    const auto sol = solve_soft(mdp);
    const auto pol = test::exact(sol);
    const State ref{1.0};
    const auto one = maxent_irl_grounded(pol, 1.0, 0.0, ref, 2);
    const auto two = maxent_irl_grounded(pol, 2.0, 0.0, ref, 2);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a)
            CHECK(two(State{double(s)}, a) == doctest::Approx(2.0 * one(State{double(s)}, a)).epsilon(1e-12));

    const double at_ref = std::log(sol.policy(1, 2));
    CHECK(maxent_irl_grounded(pol, 1.0, at_ref, ref, 2).offset == 0.0);

    const auto again = ground(one.as_function(), 0.0, ref, 2);
    CHECK(again.offset == 0.0);
    CHECK_THROWS_AS(maxent_irl_grounded(pol, 0.0, 0.0, ref), std::invalid_argument);
    CHECK_THROWS_AS(maxent_irl_grounded(pol, 1.0, 0.0, ref, 3), std::invalid_argument);
}

TEST_CASE("SPL-GD recovers linear coefficients") {
    const auto ds = random_records(400, 1);
    const double gamma = 0.9;
    const StateActionFn q = [](StateView s, int a) { return 1.5 * s[0] - 0.5 * s[1] + 0.25 * a + 2.0; };
    const StateFn v = [](StateView) { return 3.0; };
    const auto res = spl_gd(ds, q, v, gamma);
    Vector expected(4);
    expected << 1.5, -0.5, 0.25, 2.0 - gamma * 3.0;
    CHECK((res.coefficients - expected).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(res.names == std::vector<std::string>{"s1", "s2", "a", "1"});
    CHECK(res.reward(State{1.0, 1.0}, 2) == doctest::Approx(1.5 - 0.5 + 0.5 + 2.0 - 2.7));
}

TEST_CASE("SPL-GD with gamma zero fits Q itself") {
    const auto ds = random_records(200, 2);
    const StateActionFn q = [](StateView s, int a) { return -s[1] + 0.1 * a; };
    const StateFn v = [](StateView s) { return 100.0 * s[0]; };
    const auto res = spl_gd(ds, q, v, 0.0);
    for (const auto& tr : ds.transitions) CHECK(std::abs(res.reward(tr.s, tr.a) - q(tr.s, tr.a)) < 1e-9);
}

TEST_CASE("SPL-GD names the dependent column of a rank-deficient design") {
    const StateActionFn q = [](StateView s, int) { return s[0]; };
    const StateFn v = [](StateView) { return 0.0; };
    CHECK_THROWS_WITH_AS(spl_gd(random_records(50, 3, true), q, v, 0.9), doctest::Contains("'a'"),
                         std::invalid_argument);
    auto ds = random_records(50, 4);
    for (auto& tr : ds.transitions) tr.s[1] = 2.0 * tr.s[0];
    CHECK_THROWS_WITH_AS(spl_gd(ds, q, v, 0.9), doctest::Contains("dependent column"), std::invalid_argument);
    CHECK_THROWS_AS(spl_gd(TrajectoryDataset{}, q, v, 0.9), std::invalid_argument);
}

TEST_CASE("SPL-GD fitted rewards average to the mean target") {
    const auto mdp = random_tabular(6, 3, 11, 0.9);
    const auto sol = solve_soft(mdp, 1e-12);
    const auto ds = test::expert_data(mdp, sol, 50000, 4);
    const StateActionFn q = [&](StateView s, int a) { return sol.q(state_index(s), a); };
    const StateFn v = [&](StateView s) { return sol.v(state_index(s)); };
    const auto res = spl_gd(ds, q, v, mdp.gamma);
    double fitted = 0.0, target = 0.0, truth = 0.0;
    for (const auto& tr : ds.transitions) {
        fitted += res.reward(tr.s, tr.a);
        target += q(tr.s, tr.a) - mdp.gamma * v(tr.s_next);
        truth += mdp.reward(state_index(tr.s), tr.a);
    }
    const double n = static_cast<double>(ds.size());
    CHECK(std::abs(fitted - target) / n < 1e-9);
    // the one-step target is unbiased for r along the data
    CHECK(std::abs(target - truth) / n < 0.02);
}

TEST_CASE("alpha selection recovers the generating temperature") {
    for (double alpha : {0.5, 1.0, 2.0}) {
        const auto mdp = zero_anchor_mdp(alpha, 21);
        const auto sol = solve_soft(mdp, 1e-13);
        const auto ds = test::expert_data(mdp, sol, 3000, 2);
        double r_avg = 0.0;
        for (const auto& tr : ds.transitions) r_avg += mdp.reward(state_index(tr.s), tr.a);
        r_avg /= static_cast<double>(ds.size());
        const auto sel = select_alpha(ds, r_avg, mdp.gamma, known(mdp), mdp, test::exact(sol));
        CHECK(sel.alpha_hat == doctest::Approx(alpha).epsilon(1e-6));
        CHECK(sel.reference_total == doctest::Approx(r_avg * 3000.0));

        const auto doubled = select_alpha(ds, 2.0 * r_avg, mdp.gamma, known(mdp), mdp, test::exact(sol));
        CHECK(doubled.alpha_hat == doctest::Approx(2.0 * sel.alpha_hat).epsilon(1e-12));
    }
}

TEST_CASE("alpha selection rejects a zero estimated total") {
    auto mdp = zero_anchor_mdp(1.0, 22);
    mdp.reward.setZero();
    const auto sol = solve_soft(mdp, 1e-13);
    const auto ds = test::expert_data(mdp, sol, 200, 3);
    CHECK_THROWS_WITH_AS(select_alpha(ds, 0.1, mdp.gamma, known(mdp), mdp, test::exact(sol)),
                         doctest::Contains("zero"), std::invalid_argument);
}

TEST_CASE("anchor normalization") {
    const StateActionFn f = [](StateView s, int a) { return s[0] * a + 3.0; };
    const auto g = normalize_by_anchor(f, 0);
    CHECK(g(State{2.0}, 3) == 6.0);
    CHECK(g(State{-1.5}, 0) == 0.0);
    const auto h = normalize_by_anchor(f, 2);
    CHECK(h(State{1.0}, 2) == 0.0);
    CHECK(h(State{1.0}, 4) == 2.0);
}

}  // TEST_SUITE
