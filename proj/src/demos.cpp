#include "pqr/demos.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pqr {

void TrajectoryDataset::validate(const Env& env) const {
    const int n_actions = env_n_actions(env);
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const auto& tr = transitions[i];
        const auto where = "record " + std::to_string(i);
        if (tr.a < 0 || tr.a >= n_actions) throw std::invalid_argument(where + ": invalid action");
        if (!env_contains(env, tr.s)) throw std::invalid_argument(where + ": state outside the state space");
        if (!env_contains(env, tr.s_next))
            throw std::invalid_argument(where + ": next state outside the state space");
        if (i + 1 < transitions.size() && transitions[i + 1].traj == tr.traj &&
            transitions[i + 1].s != tr.s_next)
            throw std::invalid_argument(where + ": next state does not match the following record");
    }
}

TrajectoryDataset rollout(const Env& env, const PolicyFn& policy, long steps, std::uint64_t seed,
                          nlohmann::json policy_descriptor) {
    if (steps < 1) throw std::invalid_argument("rollout needs at least one step");
    const int n_actions = env_n_actions(env);
    Rng rng(seed);
    TrajectoryDataset ds;
    ds.meta = {env_to_json(env), env_gamma(env), env_alpha(env), std::move(policy_descriptor), seed, steps};
    ds.transitions.reserve(static_cast<std::size_t>(steps));
    State s = env_initial_state(env, rng);
    for (long t = 0; t < steps; ++t) {
        const auto probs = policy(s);
        if (static_cast<int>(probs.size()) != n_actions)
            throw std::invalid_argument("policy row has " + std::to_string(probs.size()) +
                                        " entries, expected " + std::to_string(n_actions));
        double total = 0.0;
        for (double pr : probs) {
            if (!(pr >= 0.0)) throw std::invalid_argument("policy row has a negative or NaN probability");
            total += pr;
        }
        if (std::abs(total - 1.0) > 1e-6)
            throw std::invalid_argument("policy row sums to " + std::to_string(total) + " at step " +
                                        std::to_string(t));
        const int a = sample_index(probs, rng);
        State next = env_step(env, s, a, rng);
        ds.transitions.push_back({0, t, s, a, next});
        s = std::move(next);
    }
    return ds;
}

namespace {

void append_vector(std::string& out, const State& v) {
    char buf[40];
    out += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        out += buf;
    }
    out += ']';
}

nlohmann::json meta_json(const DatasetMeta& m) {
    return {{"format", "pqr-demos/1"}, {"env", m.env},   {"gamma", m.gamma}, {"alpha", m.alpha},
            {"policy", m.policy},      {"seed", m.seed}, {"T", m.length}};
}

}  // namespace

std::string format_record(const Transition& tr) {
    std::string out = "{\"traj\":" + std::to_string(tr.traj) + ",\"t\":" + std::to_string(tr.t) + ",\"s\":";
    append_vector(out, tr.s);
    out += ",\"a\":" + std::to_string(tr.a) + ",\"s_next\":";
    append_vector(out, tr.s_next);
    out += '}';
    return out;
}

void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << meta_json(ds.meta).dump() << '\n';
    for (const auto& tr : ds.transitions) out << format_record(tr) << '\n';
    if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    TrajectoryDataset ds;
    std::string line;
    long line_no = 0;
    long last = -1;
    auto fail = [&](const std::string& why) -> DatasetFormatError {
        return DatasetFormatError(path.string() + ":" + std::to_string(line_no) + ": " + why +
                                      " (last complete record index " + std::to_string(last) + ")",
                                  line_no, last);
    };
    if (!std::getline(in, line)) {
        line_no = 1;
        throw fail("missing metadata header");
    }
    line_no = 1;
    try {
        const auto m = nlohmann::json::parse(line);
        ds.meta.env = m.at("env");
        ds.meta.gamma = m.at("gamma").get<double>();
        ds.meta.alpha = m.at("alpha").get<double>();
        ds.meta.policy = m.value("policy", nlohmann::json::object());
        ds.meta.seed = m.at("seed").get<std::uint64_t>();
        ds.meta.length = m.at("T").get<long>();
    } catch (const nlohmann::json::exception& e) {
        throw fail(std::string("malformed metadata header: ") + e.what());
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto r = nlohmann::json::parse(line);
            Transition tr;
            tr.traj = r.value("traj", 0);
            tr.t = r.at("t").get<long>();
            tr.s = r.at("s").get<State>();
            tr.a = r.at("a").get<int>();
            tr.s_next = r.at("s_next").get<State>();
            ds.transitions.push_back(std::move(tr));
            ++last;
        } catch (const nlohmann::json::exception& e) {
            throw fail(std::string("malformed record: ") + e.what());
        }
    }
    if (static_cast<long>(ds.transitions.size()) != ds.meta.length)
        throw fail("header declares T = " + std::to_string(ds.meta.length) + " but file holds " +
                   std::to_string(ds.transitions.size()) + " records");
    return ds;
}

}  // namespace pqr
