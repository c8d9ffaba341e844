#pragma once

#include "pqr/soft_mdp.hpp"

namespace pqr {

/// Two states, two actions, r = [[0, 1], [0, 0.5]], uniform transitions.
TabularMdp mdp2x2(double gamma = 0.5, double alpha = 1.0);

/// Rewards uniform on (-1, 1), transition rows from normalized exponential
/// draws, or a single random successor per (s, a) when `deterministic`.
TabularMdp random_tabular(int n_states, int n_actions, std::uint64_t seed, double gamma = 0.9, double alpha = 1.0,
                          bool deterministic = false);

/// {"fixture": "mdp2x2" | "random", ...}; optional "gamma", "alpha", and for
/// "random" the keys "n_states", "n_actions", "seed", "deterministic" and
/// "zero_anchor_reward" (sets g = 0).
TabularMdp fixture_from_json(const nlohmann::json& j);

}  // namespace pqr
