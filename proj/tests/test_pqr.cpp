#include "support.hpp"

using namespace pqr;
using test::max_abs;

namespace {

PqrConfig exact_config(const TabularMdp& mdp) {
    PqrConfig c;
    c.gamma = mdp.gamma;
    c.alpha = mdp.alpha;
    c.mode = ExpectationMode::known_transition;
    c.fixed_point_tol = 1e-12;
    return c;
}

PolicyEstimate table_estimate(Matrix log_rows) {
    const auto n = static_cast<int>(log_rows.cols());
    return PolicyEstimate(PolicyRepresentation::tabular, n, 1e-6, [log_rows](StateView s) {
        std::vector<double> out(static_cast<std::size_t>(log_rows.cols()));
        for (Eigen::Index a = 0; a < log_rows.cols(); ++a) out[static_cast<std::size_t>(a)] = log_rows(state_index(s), a);
        return out;
    });
}

double dataset_mse(const TrajectoryDataset& ds, const StateActionFn& f, const Matrix& truth) {
    double acc = 0.0;
    for (const auto& tr : ds.transitions) acc += std::pow(f(tr.s, tr.a) - truth(state_index(tr.s), tr.a), 2);
    return acc / static_cast<double>(ds.size());
}

}  // namespace

TEST_SUITE("pqr") {

TEST_CASE("anchor fixed point with gamma zero is g after one iteration") {
    const auto mdp = random_tabular(4, 3, 2, 0.0);
    const auto sol = solve_soft(mdp);
    const auto qa = solve_qa_exact(mdp, exact_policy(sol), 1e-10);
    CHECK(qa.converged);
    CHECK(max_abs(qa.values - mdp.anchor_reward()) == 0.0);
    CHECK(qa.iterations <= 2);
}

TEST_CASE("anchor fixed point matches the solved anchor column") {
    for (const auto& mdp : {mdp2x2(), random_tabular(6, 3, 9), random_tabular(4, 4, 10, 0.95, 0.3)}) {
        const auto sol = solve_soft(mdp, 1e-12);
        const auto qa = solve_qa_exact(mdp, exact_policy(sol), 1e-12);
        CHECK(max_abs(qa.values - sol.q.col(mdp.anchor_action)) < 1e-8);
    }
}

TEST_CASE("anchor fixed point closed form for constant g and constant pi") {
    auto mdp = random_tabular(5, 2, 4, 0.8, 0.7);
    mdp.reward.col(0).setConstant(1.3);
    const double q = 0.35;
    Matrix rows(5, 2);
    rows.col(0).setConstant(std::log(q));
    rows.col(1).setConstant(std::log(1.0 - q));
    const auto qa = solve_qa_exact(mdp, table_estimate(rows), 1e-13);
    const double expected = (1.3 - 0.8 * 0.7 * std::log(q)) / 0.2;
    for (int s = 0; s < 5; ++s) CHECK(std::abs(qa.values(s) - expected) < 1e-10);
}

TEST_CASE("Q estimator anchor identity is bitwise") {
    const auto mdp = random_tabular(5, 3, 3);
    const auto sol = solve_soft(mdp);
    auto pol = test::exact(sol);
    const StateFn anchor = [](StateView s) { return 0.1 * s[0] + 1.0 / 3.0; };
    const auto q = q_estimator(pol, anchor, 0.7, 0);
    for (int s = 0; s < 5; ++s) CHECK(q.q_value(State{double(s)}, 0) == q.anchor_component(State{double(s)}));

    const auto env = SyntheticMdp::make(3, 1);
    auto uniform = std::make_shared<const PolicyEstimate>(PolicyRepresentation::softmax_net, 5, 1e-6,
                                                          [](StateView s) {
                                                              std::vector<double> r(5);
                                                              for (int a = 0; a < 5; ++a) r[a] = -1.6 + 0.01 * a * s[0];
                                                              return r;
                                                          });
    const auto qc = q_estimator(uniform, [](StateView s) { return std::sin(s[1]); }, 1.0, 2);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const State s = sample_box_state(env, rng);
        CHECK(qc.q_value(s, 2) == qc.anchor_component(s));
    }
}

TEST_CASE("Q estimator with exact inputs reproduces Q") {
    const auto mdp = mdp2x2();
    const auto sol = solve_soft(mdp, 1e-12);
    const auto qa = solve_qa_exact(mdp, exact_policy(sol), 1e-12);
    const Vector vals = qa.values;
    const auto q = q_estimator(test::exact(sol), [vals](StateView s) { return vals(state_index(s)); }, 1.0, 0);
    CHECK(max_abs(tabulate([&](StateView s, int a) { return q.q_value(s, a); }, 2, 2) - sol.q) < 1e-8);
}

TEST_CASE("Q estimator is invariant to per-state log shifts") {
    const auto mdp = random_tabular(4, 3, 12);
    const auto sol = solve_soft(mdp);
    Matrix rows = sol.policy.array().log();
    Matrix shifted = rows;
    for (int s = 0; s < 4; ++s) shifted.row(s).array() += 0.5 * s - 0.2;
    const StateFn anchor = [](StateView s) { return s[0] * s[0]; };
    const auto a = q_estimator(std::make_shared<const PolicyEstimate>(table_estimate(rows)), anchor, 1.0, 0);
    const auto b = q_estimator(std::make_shared<const PolicyEstimate>(table_estimate(shifted)), anchor, 1.0, 0);
    for (int s = 0; s < 4; ++s)
        for (int k = 0; k < 3; ++k)
            CHECK(std::abs(a.q_value(State{double(s)}, k) - b.q_value(State{double(s)}, k)) < 1e-12);
}

TEST_CASE("FQI-I with exact per-state averaging approaches the soft Q") {
    const auto mdp = mdp2x2();
    const auto sol = solve_soft(mdp, 1e-12);
    const auto ds = test::expert_data(mdp, sol, 100000, 8);
    FqiConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.alpha = mdp.alpha;
    cfg.rounds = 50;
    cfg.mode = ExpectationMode::tabular_average;
    cfg.anchor_reward = [&](StateView s) { return mdp.reward(state_index(s), 0); };
    const auto res = fqi_identify(ds, test::exact(sol), cfg, mdp);
    const Matrix q = tabulate([&](StateView s, int a) { return res.q.q_value(s, a); }, 2, 2);
    CHECK(max_abs(q - sol.q) < 0.05);
    CHECK(res.rounds.size() == 50);
    CHECK(res.anchor_transitions > 0);
}

TEST_CASE("FQI-I with gamma zero and one round") {
    const auto mdp = random_tabular(4, 3, 5, 0.0);
    const auto sol = solve_soft(mdp);
    const auto ds = test::expert_data(mdp, sol, 5000, 1);
    auto pol = std::make_shared<const PolicyEstimate>(fit_policy_mle(ds, mdp, PolicyFitConfig{}));
    FqiConfig cfg;
    cfg.gamma = 0.0;
    cfg.rounds = 1;
    cfg.mode = ExpectationMode::tabular_average;
    cfg.anchor_reward = [&](StateView s) { return mdp.reward(state_index(s), 0); };
    const auto res = fqi_identify(ds, pol, cfg, mdp);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a) {
            const State st{double(s)};
            const double expected = pol->log_prob(st, a) - pol->log_prob(st, 0) + mdp.reward(s, 0);
            CHECK(res.q.q_value(st, a) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("FQI-I error does not grow from 10 to 20 rounds") {
    const auto mdp = random_tabular(5, 3, 14, 0.8);
    const auto sol = solve_soft(mdp, 1e-12);
    const auto ds = test::expert_data(mdp, sol, 50000, 3);
    FqiConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.mode = ExpectationMode::tabular_average;
    cfg.anchor_reward = [&](StateView s) { return mdp.reward(state_index(s), 0); };
    auto err = [&](int n) {
        cfg.rounds = n;
        const auto res = fqi_identify(ds, test::exact(sol), cfg, mdp);
        return max_abs(tabulate([&](StateView s, int a) { return res.q.q_value(s, a); }, 5, 3) - sol.q);
    };
    CHECK(err(20) <= err(10));
}

TEST_CASE("FQI-I rejects data without anchor transitions") {
    const auto mdp = mdp2x2();
    TrajectoryDataset ds;
    for (long t = 0; t < 4; ++t) ds.transitions.push_back({0, t, {0.0}, 1, {0.0}});
    FqiConfig cfg;
    cfg.mode = ExpectationMode::tabular_average;
    CHECK_THROWS_WITH_AS(fqi_identify(ds, test::exact(solve_soft(mdp)), cfg, mdp), doctest::Contains("0 of 4"),
                         std::invalid_argument);
    PqrConfig pc;
    pc.mode = ExpectationMode::tabular_average;
    try {
        pqr_full(ds, pc, mdp);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "fqi");
    }
}

TEST_CASE("default round count follows the discount bound") {
    CHECK(default_fqi_rounds(0.5, 1.0) == 12);
    CHECK(default_fqi_rounds(0.0, 5.0) == 1);
    const int n = default_fqi_rounds(0.9, 2.0);
    CHECK(std::pow(0.9, n) * 4.0 / 0.1 < 1e-3);
    CHECK(std::pow(0.9, n - 1) * 4.0 / 0.1 >= 1e-3);
}

TEST_CASE("reward estimation with gamma zero returns Q without a regressor") {
    const auto env = SyntheticMdp::make(3, 2, 0.0);
    const auto ds = rollout(env, [](StateView) { return std::vector<double>(5, 0.2); }, 200, 1);
    auto pol = std::make_shared<const PolicyEstimate>(PolicyRepresentation::softmax_net, 5, 1e-6,
                                                      [](StateView) { return std::vector<double>(5, std::log(0.2)); });
    const auto q = q_estimator(pol, [](StateView s) { return s[0] + 2.0; }, 1.0, 0);
    RewardConfig rc;
    rc.gamma = 0.0;
    const auto r = reward_estimation(ds, q, *pol, rc, env);
    for (const auto& tr : ds.transitions)
        for (int a = 0; a < 5; ++a) CHECK(r(tr.s, a) == q.q_value(tr.s, a));
}

TEST_CASE("reward estimation with exact inputs recovers r") {
    for (const auto& mdp : {mdp2x2(), random_tabular(6, 3, 21)}) {
        const auto sol = solve_soft(mdp, 1e-12);
        const auto pol = test::exact(sol);
        const auto q = QEstimate::from_table(sol.q, mdp.alpha, 0);
        RewardConfig rc{mdp.gamma, mdp.alpha, ExpectationMode::known_transition, {}};
        const auto r = reward_estimation(TrajectoryDataset{{}, {{0, 0, {0.0}, 0, {0.0}}}}, q, *pol, rc, mdp);
        CHECK(max_abs(r.tabulate(mdp.n_states, mdp.n_actions) - mdp.reward) < 1e-8);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a) {
                const State st{double(s)};
                CHECK(r(st, a) == q.q_value(st, a) - mdp.gamma * r.expectation_model(st, a));
            }
    }
}

TEST_CASE("shaped Q gives the shaped reward") {
    const auto mdp = mdp2x2();
    const auto sol = solve_soft(mdp, 1e-12);
    Vector phi(2);
    phi << 0.0, 1.0;  // phi(s) = s
    Matrix shaped = sol.q;
    for (int s = 0; s < 2; ++s) shaped.row(s).array() += phi(s);
    RewardConfig rc{mdp.gamma, mdp.alpha, ExpectationMode::known_transition, {}};
    const auto r = reward_estimation(TrajectoryDataset{{}, {{0, 0, {0.0}, 0, {0.0}}}},
                                     QEstimate::from_table(shaped, 1.0, 0), exact_policy(sol), rc, mdp);
    Matrix expected = mdp.reward;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) expected(s, a) += phi(s) - mdp.gamma * (0.5 * phi(0) + 0.5 * phi(1));
    CHECK(max_abs(r.tabulate(2, 2) - expected) < 1e-12);
    CHECK(max_abs(shaping_probe(mdp, phi) - expected) < 1e-12);
}

TEST_CASE("shaping probe examples") {
    const auto mdp = random_tabular(4, 2, 30, 0.7);
    CHECK(max_abs(shaping_probe(mdp, Vector::Zero(4)) - mdp.reward) == 0.0);
    const Matrix c = shaping_probe(mdp, Vector::Constant(4, 2.0)) - mdp.reward;
    CHECK(max_abs(c.array() - 2.0 * 0.3) < 1e-12);

    const auto m2 = mdp2x2();
    Vector ind = Vector::Zero(2);
    ind(0) = 1.0;
    const Matrix probe = shaping_probe(m2, ind);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) {
            double e = 0.0;
            for (int s2 = 0; s2 < 2; ++s2) e += m2.p(s, a, s2) * (s2 == 0 ? 1.0 : 0.0);
            CHECK(probe(s, a) == doctest::Approx(m2.reward(s, a) + (s == 0 ? 1.0 : 0.0) - m2.gamma * e));
        }
}

TEST_CASE("random potentials shift the estimated reward by the shaping term") {
    const auto mdp = random_tabular(5, 3, 40, 0.9);
    const auto sol = solve_soft(mdp, 1e-12);
    const auto pol = exact_policy(sol);
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        Vector phi(5);
        for (int s = 0; s < 5; ++s) phi(s) = 4.0 * uniform01(rng) - 2.0;
        Matrix shaped = sol.q;
        for (int s = 0; s < 5; ++s) shaped.row(s).array() += phi(s);
        RewardConfig rc{mdp.gamma, mdp.alpha, ExpectationMode::known_transition, {}};
        const auto r = reward_estimation(TrajectoryDataset{{}, {{0, 0, {0.0}, 0, {0.0}}}},
                                         QEstimate::from_table(shaped, 1.0, 0), pol, rc, mdp);
        CHECK(max_abs(r.tabulate(5, 3) - shaping_probe(mdp, phi)) < 1e-8);
    }
}

TEST_CASE("exact end-to-end pipeline recovers r, Q and the anchor values") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto mdp = random_tabular(3 + static_cast<int>(seed) * 2, 1 + static_cast<int>(seed), seed, 0.9, 0.8);
        const auto sol = solve_soft(mdp, 1e-13);
        const auto ds = test::expert_data(mdp, sol, 100, seed);
        const auto run = pqr_full(ds, exact_config(mdp), mdp, test::exact(sol));
        const Matrix q = tabulate([&](StateView s, int a) { return run.fqi.q.q_value(s, a); }, mdp.n_states,
                                  mdp.n_actions);
        CHECK(max_abs(q - sol.q) < 1e-6);
        CHECK(max_abs(run.reward.tabulate(mdp.n_states, mdp.n_actions) - mdp.reward) < 1e-6);
    }
}

TEST_CASE("PQR with default settings on mdp2x2") {
    const auto mdp = mdp2x2();
    const auto sol = solve_soft(mdp, 1e-12);
    const auto ds = test::expert_data(mdp, sol, 100000, 12);
    PqrConfig cfg;
    cfg.gamma = mdp.gamma;
    const auto run = pqr_full(ds, cfg, mdp);
    CHECK(dataset_mse(ds, run.reward.reward, mdp.reward) < 0.05);

    const auto& m = run.manifest;
    for (const char* key : {"stage_seeds", "fqi_rounds", "re_train_loss", "config_echo", "anchor_transitions"})
        CHECK(m.contains(key));
    CHECK(m["fqi_rounds"].size() == static_cast<std::size_t>(default_fqi_rounds(0.5, m["fqi_rounds"][0]["max_abs_target"])));
    CHECK(m["fqi_rounds"][0].contains("train_loss"));

}

TEST_CASE("pipeline runs are reproducible") {
    const auto mdp = mdp2x2();
    const auto ds = test::expert_data(mdp, solve_soft(mdp), 2000, 13);
    PqrConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.q_trainer.iterations = 100;
    cfg.reward_trainer.iterations = 100;
    const auto a = pqr_full(ds, cfg, mdp);
    const auto b = pqr_full(ds, cfg, mdp);
    CHECK(a.manifest == b.manifest);
    CHECK(a.reward(State{1.0}, 1) == b.reward(State{1.0}, 1));
}

TEST_CASE("temperature scales the estimated reward") {
    const auto base = random_tabular(5, 3, 50, 0.9, 1.0);
    const auto sol = solve_soft(base, 1e-13);
    const auto ds = test::expert_data(base, sol, 2000, 5);
    const auto pol = test::exact(sol);
    PqrConfig c1 = exact_config(base);
    c1.anchor_reward = AnchorRewardSource::zero;
    PqrConfig c2 = c1;
    c1.alpha = 1.0;
    c2.alpha = 2.0;
    const Matrix r1 = pqr_full(ds, c1, base, pol).reward.tabulate(5, 3);
    const Matrix r2 = pqr_full(ds, c2, base, pol).reward.tabulate(5, 3);
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 3; ++a)
            if (std::abs(r2(s, a)) > 1e-8) CHECK(std::abs(r1(s, a) / r2(s, a) - 0.5) < 1e-6);
}

TEST_CASE("clipped policies keep every target finite") {
    const auto mdp = random_tabular(4, 2, 60, 0.9);
    Matrix rows(4, 2);
    rows.col(0).setConstant(-std::numeric_limits<double>::infinity());
    rows.col(1).setZero();
    rows(0, 0) = std::log(0.5);
    rows(0, 1) = std::log(0.5);
    const auto pol = std::make_shared<const PolicyEstimate>(table_estimate(rows));
    TrajectoryDataset ds;
    Rng rng(3);
    State s{0.0};
    for (long t = 0; t < 400; ++t) {
        const int a = static_cast<int>(uniform01(rng) * 2);
        State next = env_step(Env{mdp}, s, a, rng);
        ds.transitions.push_back({0, t, s, a, next});
        s = next;
    }
    PqrConfig cfg;
    cfg.mode = ExpectationMode::tabular_average;
    cfg.rounds = 30;
    const auto run = pqr_full(ds, cfg, mdp, pol);
    CHECK(run.reward.tabulate(4, 2).allFinite());
}

TEST_CASE("pipeline config JSON") {
    PqrConfig c;
    c.gamma = 0.7;
    c.mode = ExpectationMode::tabular_average;
    c.anchor_reward = AnchorRewardSource::zero;
    const auto back = PqrConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK_THROWS_AS(PqrConfig::from_json({{"gamma", 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(PqrConfig::from_json({{"anchor_reward", "oracle"}}), std::invalid_argument);
    CHECK(expectation_mode_from("exact") == ExpectationMode::known_transition);
    CHECK_THROWS_AS(expectation_mode_from("magic"), std::invalid_argument);
}

}  // TEST_SUITE
