#pragma once

#include "pqr/soft_mdp.hpp"

#include <filesystem>

namespace pqr {

/// Maps a state to a probability row over actions.
using PolicyFn = std::function<std::vector<double>(StateView)>;

struct Transition {
    int traj = 0;
    long t = 0;
    State s;
    int a = 0;
    State s_next;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct DatasetMeta {
    nlohmann::json env;     // serialized environment
    double gamma = 0.0;     // generation discount
    double alpha = 1.0;     // generation temperature
    nlohmann::json policy;  // free-form descriptor of the behaviour policy
    std::uint64_t seed = 0;
    long length = 0;        // number of transition records

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Ordered (s_t, a_t, s_{t+1}) records plus generation metadata.
struct TrajectoryDataset {
    DatasetMeta meta;
    std::vector<Transition> transitions;

    std::size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }

    /// Contiguity within each trajectory, action and state validity against
    /// `env`. Throws std::invalid_argument naming the first bad record.
    void validate(const Env& env) const;

    friend bool operator==(const TrajectoryDataset&, const TrajectoryDataset&) = default;
};

/// Malformed dataset file. `line` is 1-based; `last_complete_record` is the
/// index of the last record parsed successfully (-1 if none).
class DatasetFormatError : public std::runtime_error {
public:
    DatasetFormatError(const std::string& what, long line, long last_complete_record)
        : std::runtime_error(what), line_(line), last_(last_complete_record) {}
    long line() const noexcept { return line_; }
    long last_complete_record() const noexcept { return last_; }

private:
    long line_;
    long last_;
};

/// One trajectory of T steps: a_t ~ policy(s_t), s_{t+1} ~ P(. | s_t, a_t).
/// A policy row that fails to normalize within 1e-6 is rejected before the
/// draw.
TrajectoryDataset rollout(const Env& env, const PolicyFn& policy, long steps, std::uint64_t seed,
                          nlohmann::json policy_descriptor = nlohmann::json::object());

/// JSON lines: a metadata object, then one {"traj","t","s","a","s_next"}
/// object per record with 17 significant digits.
void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& path);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

std::string format_record(const Transition& tr);

}  // namespace pqr
