#pragma once

#include "pqr/fixtures.hpp"
#include "pqr/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <memory>

#include <unistd.h>

namespace pqr::test {

inline PolicyFn table_policy(const Matrix& pi) {
    return [pi](StateView s) {
        std::vector<double> out(static_cast<std::size_t>(pi.cols()));
        for (Eigen::Index a = 0; a < pi.cols(); ++a) out[static_cast<std::size_t>(a)] = pi(state_index(s), a);
        return out;
    };
}

inline TrajectoryDataset expert_data(const TabularMdp& mdp, const SoftSolution& sol, long steps, std::uint64_t seed) {
    return rollout(mdp, table_policy(sol.policy), steps, seed, {{"kind", "soft-optimal"}});
}

inline std::shared_ptr<const PolicyEstimate> exact(const SoftSolution& sol) {
    return std::make_shared<const PolicyEstimate>(exact_policy(sol));
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("pqr-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace pqr::test
