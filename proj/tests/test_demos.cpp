#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace pqr;
using test::TempDir;

TEST_SUITE("demos") {

TEST_CASE("rollout of a deterministic one-action MDP") {
    Matrix r(1, 1);
    r << 0.0;
    const auto mdp = TabularMdp::make(1, 1, {1.0}, r, 0.9, 1.0);
    const auto ds = rollout(mdp, [](StateView) { return std::vector<double>{1.0}; }, 3, 0);
    REQUIRE(ds.size() == 3);
    for (long t = 0; t < 3; ++t) {
        const auto& tr = ds.transitions[static_cast<std::size_t>(t)];
        CHECK(tr.t == t);
        CHECK(tr.s == State{0.0});
        CHECK(tr.a == 0);
        CHECK(tr.s_next == State{0.0});
    }
    CHECK(ds.meta.length == 3);
}

TEST_CASE("long rollout action frequencies match the generating policy") {
    const auto mdp = mdp2x2();
    const auto sol = solve_soft(mdp, 1e-12);
    const auto ds = test::expert_data(mdp, sol, 100000, 17);
    Matrix counts = Matrix::Zero(2, 2);
    for (const auto& tr : ds.transitions) counts(state_index(tr.s), tr.a) += 1.0;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) CHECK(std::abs(counts(s, a) / counts.row(s).sum() - sol.policy(s, a)) < 0.01);
    CHECK_NOTHROW(ds.validate(mdp));
}

TEST_CASE("rollout is deterministic per seed") {
    const auto mdp = random_tabular(5, 3, 2);
    const auto sol = solve_soft(mdp);
    CHECK(test::expert_data(mdp, sol, 500, 4) == test::expert_data(mdp, sol, 500, 4));
    CHECK_FALSE(test::expert_data(mdp, sol, 500, 4) == test::expert_data(mdp, sol, 500, 5));

    const auto env = SyntheticMdp::make(3, 1);
    const PolicyFn uniform = [](StateView) { return std::vector<double>(5, 0.2); };
    const auto a = rollout(env, uniform, 300, 9);
    CHECK(a == rollout(env, uniform, 300, 9));
    CHECK_NOTHROW(a.validate(env));
}

TEST_CASE("rollout rejects a policy row that does not normalize") {
    const auto mdp = mdp2x2();
    CHECK_THROWS_AS(rollout(mdp, [](StateView) { return std::vector<double>{0.5, 0.6}; }, 10, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(rollout(mdp, [](StateView) { return std::vector<double>{1.0}; }, 10, 0), std::invalid_argument);
    CHECK_THROWS_AS(rollout(mdp, [](StateView) { return std::vector<double>{0.5, 0.5}; }, 0, 0),
                    std::invalid_argument);
}

TEST_CASE("validate detects broken contiguity and bad actions") {
    const auto mdp = mdp2x2();
    auto ds = test::expert_data(mdp, solve_soft(mdp), 20, 1);
    auto broken = ds;
    broken.transitions[5].s_next = {broken.transitions[6].s[0] == 0.0 ? 1.0 : 0.0};
    CHECK_THROWS_WITH_AS(broken.validate(mdp), doctest::Contains("record 5"), std::invalid_argument);
    auto bad_action = ds;
    bad_action.transitions[2].a = 7;
    CHECK_THROWS_AS(bad_action.validate(mdp), std::invalid_argument);
}

TEST_CASE("empty dataset round trips as a header-only file") {
    TempDir dir;
    TrajectoryDataset ds;
    ds.meta.env = env_to_json(mdp2x2());
    ds.meta.gamma = 0.5;
    save_dataset(ds, dir / "empty.jsonl");
    std::ifstream in(dir / "empty.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 1);
    CHECK(load_dataset(dir / "empty.jsonl") == ds);
}

TEST_CASE("datasets round trip bit-exactly") {
    TempDir dir;
    const auto mdp = mdp2x2();
    const auto ds = test::expert_data(mdp, solve_soft(mdp), 100, 3);
    save_dataset(ds, dir / "d.jsonl");
    CHECK(load_dataset(dir / "d.jsonl") == ds);

    const auto env = SyntheticMdp::make(4, 6);
    const auto cont = rollout(env, [](StateView) { return std::vector<double>(5, 0.2); }, 200, 8);
    save_dataset(cont, dir / "c.jsonl");
    const auto back = load_dataset(dir / "c.jsonl");
    CHECK(back == cont);
}

TEST_CASE("truncated final line names the last complete record") {
    TempDir dir;
    const auto mdp = mdp2x2();
    const auto ds = test::expert_data(mdp, solve_soft(mdp), 10, 3);
    save_dataset(ds, dir / "d.jsonl");
    std::ifstream in(dir / "d.jsonl");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    text.resize(text.size() - 12);
    std::ofstream(dir / "t.jsonl") << text;
    try {
        load_dataset(dir / "t.jsonl");
        FAIL("truncated file loaded");
    } catch (const DatasetFormatError& e) {
        CHECK(e.last_complete_record() == 8);
        CHECK(e.line() == 11);
        CHECK(std::string(e.what()).find("last complete record index 8") != std::string::npos);
    }
}

TEST_CASE("malformed lines and header mismatches are rejected") {
    TempDir dir;
    std::ofstream(dir / "bad.jsonl") << "{\"env\":{},\"gamma\":0.5,\"alpha\":1,\"seed\":0,\"T\":1}\nnot json\n";
    try {
        load_dataset(dir / "bad.jsonl");
        FAIL("malformed file loaded");
    } catch (const DatasetFormatError& e) {
        CHECK(e.line() == 2);
        CHECK(e.last_complete_record() == -1);
    }
    std::ofstream(dir / "short.jsonl") << "{\"env\":{},\"gamma\":0.5,\"alpha\":1,\"seed\":0,\"T\":2}\n"
                                       << "{\"traj\":0,\"t\":0,\"s\":[0],\"a\":0,\"s_next\":[1]}\n";
    CHECK_THROWS_WITH_AS(load_dataset(dir / "short.jsonl"), doctest::Contains("declares T = 2"), DatasetFormatError);
    std::ofstream(dir / "nohdr.jsonl") << "";
    CHECK_THROWS_AS(load_dataset(dir / "nohdr.jsonl"), DatasetFormatError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), std::runtime_error);
}

}  // TEST_SUITE
