#include "pqr/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace pqr;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad sweep value '" + item + "'");
        out.push_back(v);
    }
    return out;
}

EvalSet export_set(const Env& env, const TrajectoryDataset& ds) {
    return std::holds_alternative<TabularMdp>(env) ? grid_eval_set(env, 0, 0) : dataset_eval_set(ds);
}

void print_rows(const std::vector<MetricsRow>& rows) {
    std::cout << csv_header() << '\n';
    for (const auto& r : rows) std::cout << format_csv_row(r) << '\n';
}

int report_failures(const std::vector<MetricsRow>& rows) {
    int bad = 0;
    for (const auto& r : rows)
        if (!r.ok) {
            std::cerr << "error: " << r.method << " failed in stage " << r.stage << ": " << r.error << '\n';
            ++bad;
        }
    return bad ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PQR inverse reinforcement learning with anchor actions"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Roll out the soft-optimal expert of an environment");
    std::string gen_env, gen_out, gen_expert;
    long gen_steps = 1000;
    std::uint64_t gen_seed = 0;
    gen->add_option("--env", gen_env, "Environment spec (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--steps", gen_steps, "Number of transitions")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Rollout seed");
    gen->add_option("--out", gen_out, "Output JSON-lines file")->required();
    gen->add_option("--expert", gen_expert, "Fitted soft-Q settings for the synthetic env (JSON)");

    // solve
    auto* solve = app.add_subcommand("solve", "Soft value iteration (tabular) or fitted soft-Q (synthetic)");
    std::string solve_env, solve_out, solve_expert;
    double solve_tol = 1e-10;
    solve->add_option("--env", solve_env, "Environment spec (JSON)")->required()->check(CLI::ExistingFile);
    solve->add_option("--tol", solve_tol, "Sup-norm residual tolerance")->check(CLI::PositiveNumber);
    solve->add_option("--out", solve_out, "Output JSON")->required();
    solve->add_option("--expert", solve_expert, "Fitted soft-Q settings (JSON)");

    // pqr
    auto* run = app.add_subcommand("pqr", "Run the PQR pipeline on a dataset");
    std::string run_data, run_config, run_out;
    std::optional<std::uint64_t> run_seed;
    bool run_exact = false;
    run->add_option("--data", run_data, "Dataset (JSON lines)")->required()->check(CLI::ExistingFile);
    run->add_option("--config", run_config, "PQR config (JSON)")->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "Output directory")->required();
    run->add_option("--seed", run_seed, "Pipeline seed");
    run->add_flag("--exact-policy", run_exact, "Use the expert policy instead of fitting one");

    // baseline
    auto* base = app.add_subcommand("baseline", "Grounded MaxEnt-IRL, SPL-GD, or alpha selection");
    std::string base_method = "maxent", base_data, base_config, base_out;
    bool base_alpha = false, base_exact = false;
    std::optional<double> base_ravg;
    base->add_option("--method", base_method, "maxent or splgd")->check(CLI::IsMember({"maxent", "splgd"}));
    base->add_option("--data", base_data, "Dataset (JSON lines)")->required()->check(CLI::ExistingFile);
    base->add_option("--config", base_config, "PQR config used for policy fitting and gamma/alpha (JSON)")
        ->check(CLI::ExistingFile);
    base->add_option("--out", base_out, "Output directory")->required();
    base->add_flag("--alpha-select", base_alpha, "Estimate alpha from the average reward instead");
    base->add_option("--r-avg", base_ravg, "Average reward over the dataset (alpha selection)");
    base->add_flag("--exact-policy", base_exact, "Use the expert policy instead of fitting one");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Run an experiment template over an axis");
    std::string sw_template, sw_axis, sw_values, sw_out, sw_manifest;
    int sw_workers = 1;
    sw->add_option("--template", sw_template, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sw->add_option("--axis", sw_axis, "p, gamma, alpha or T")->required()->check(CLI::IsMember({"p", "gamma", "alpha", "T"}));
    sw->add_option("--values", sw_values, "Comma-separated values")->required();
    sw->add_option("--out", sw_out, "Aggregated CSV")->required();
    sw->add_option("--manifest", sw_manifest, "Manifest JSON");
    sw->add_option("--workers", sw_workers, "Concurrent sweep points")->check(CLI::PositiveNumber);

    // eval
    auto* ev = app.add_subcommand("eval", "Score an exported estimate against the true reward");
    std::string ev_estimate, ev_truth = "env", ev_env, ev_out, ev_expert;
    ev->add_option("--estimate", ev_estimate, "Estimate JSON written by pqr/baseline")->required()->check(CLI::ExistingFile);
    ev->add_option("--truth", ev_truth, "Truth source (env)")->check(CLI::IsMember({"env"}));
    ev->add_option("--env", ev_env, "Environment spec; defaults to the one stored in the estimate")->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "Metrics CSV")->required();
    ev->add_option("--expert", ev_expert, "Fitted soft-Q settings (JSON)");

    // experiment
    auto* ex = app.add_subcommand("experiment", "Run one experiment config end to end");
    std::string ex_config, ex_out, ex_manifest;
    bool ex_robust = false;
    ex->add_option("--config", ex_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", ex_out, "CSV output");
    ex->add_option("--manifest", ex_manifest, "Manifest JSON");
    ex->add_flag("--robustness", ex_robust, "State-only reward with a randomly designated anchor");

    CLI11_PARSE(app, argc, argv);

    try {
        auto expert_cfg = [](const std::string& path) {
            return path.empty() ? FittedSoftQConfig{} : FittedSoftQConfig::from_json(read_json(path));
        };

        if (*gen) {
            const Env env = env_from_json(read_json(gen_env));
            const auto truth = ground_truth(env, expert_cfg(gen_expert));
            const auto ds = rollout(env, truth.policy, gen_steps, gen_seed, truth.descriptor);
            save_dataset(ds, gen_out);
            std::cerr << "wrote " << ds.size() << " transitions to " << gen_out << '\n';
            return 0;
        }

        if (*solve) {
            const Env env = env_from_json(read_json(solve_env));
            if (const auto* mdp = std::get_if<TabularMdp>(&env)) {
                const auto sol = solve_soft(*mdp, solve_tol);
                write_json(solve_out, to_json(sol));
                if (!sol.converged) {
                    std::cerr << "error: no convergence after " << sol.iterations << " iterations (residual "
                              << sol.residual << ")\n";
                    return 1;
                }
            } else {
                const auto fitted = fitted_soft_q(std::get<SyntheticMdp>(env), expert_cfg(solve_expert));
                write_json(solve_out, fitted.to_json());
            }
            return 0;
        }

        if (*run) {
            const auto ds = load_dataset(run_data);
            const Env env = env_from_json(ds.meta.env);
            ds.validate(env);
            nlohmann::json j = run_config.empty() ? nlohmann::json::object() : read_json(run_config);
            if (!j.contains("gamma")) j["gamma"] = ds.meta.gamma;
            if (!j.contains("alpha")) j["alpha"] = ds.meta.alpha;
            auto cfg = PqrConfig::from_json(j);
            if (run_seed) cfg.seed = *run_seed;
            std::shared_ptr<const PolicyEstimate> override;
            if (run_exact || j.value("exact_policy", false)) {
                const auto expert = j.contains("expert") ? FittedSoftQConfig::from_json(j["expert"]) : FittedSoftQConfig{};
                override = ground_truth(env, expert).policy_estimate;
            }
            const auto result = pqr_full(ds, cfg, env, override);
            const QEstimate q = result.fqi.q;
            write_json(fs::path(run_out) / "reward.json",
                       export_estimate("pqr", env, result.reward.reward,
                                       [q](StateView s, int a) { return q.q_value(s, a); }, export_set(env, ds),
                                       cfg.anchor_action));
            write_json(fs::path(run_out) / "manifest.json", result.manifest);
            return 0;
        }

        if (*base) {
            const auto ds = load_dataset(base_data);
            const Env env = env_from_json(ds.meta.env);
            ds.validate(env);
            nlohmann::json j = base_config.empty() ? nlohmann::json::object() : read_json(base_config);
            if (!j.contains("gamma")) j["gamma"] = ds.meta.gamma;
            if (!j.contains("alpha")) j["alpha"] = ds.meta.alpha;
            const auto cfg = PqrConfig::from_json(j);
            const auto expert = j.contains("expert") ? FittedSoftQConfig::from_json(j["expert"]) : FittedSoftQConfig{};
            const auto truth = ground_truth(env, expert);
            const bool exact = base_exact || j.value("exact_policy", false);

            if (base_alpha) {
                double r_avg = 0.0;
                if (base_ravg) {
                    r_avg = *base_ravg;
                } else {
                    for (const auto& tr : ds.transitions) r_avg += truth.reward(tr.s, tr.a);
                    r_avg /= static_cast<double>(ds.size());
                }
                const auto sel = select_alpha(ds, r_avg, cfg.gamma, cfg, env, exact ? truth.policy_estimate : nullptr);
                write_json(fs::path(base_out) / "alpha.json", {{"alpha_hat", sel.alpha_hat},
                                                                {"r_avg", r_avg},
                                                                {"estimated_total", sel.estimated_total},
                                                                {"reference_total", sel.reference_total}});
                std::cout << sel.alpha_hat << '\n';
                return 0;
            }

            StateActionFn reward, qfn;
            nlohmann::json manifest{{"method", base_method}};
            if (base_method == "maxent") {
                std::shared_ptr<const PolicyEstimate> policy;
                if (exact) {
                    policy = truth.policy_estimate;
                } else {
                    auto pc = cfg.policy_fit;
                    pc.trainer.seed = derive_seed(cfg.seed, 1);
                    pc.trainer.clip_floor = cfg.clip_floor;
                    policy = std::make_shared<const PolicyEstimate>(fit_policy_mle(ds, env, pc));
                }
                const State ref(ds.transitions.front().s.size(), 0.0);
                const auto grounded = maxent_irl_grounded(policy, cfg.alpha, truth.q(ref, 0), ref, 0);
                qfn = grounded.as_function();
                reward = normalize_by_anchor(qfn, cfg.anchor_action);
                manifest["offset"] = grounded.offset;
            } else {
                const auto fit = spl_gd(ds, truth.q, truth.v, cfg.gamma);
                reward = normalize_by_anchor(fit.reward, cfg.anchor_action);
                for (std::size_t i = 0; i < fit.names.size(); ++i)
                    manifest["coefficients"][fit.names[i]] = fit.coefficients(static_cast<Eigen::Index>(i));
            }
            write_json(fs::path(base_out) / "reward.json",
                       export_estimate(base_method, env, reward, qfn, export_set(env, ds), cfg.anchor_action));
            write_json(fs::path(base_out) / "manifest.json", manifest);
            return 0;
        }

        if (*sw) {
            const auto tmpl = ExperimentConfig::from_json(read_json(sw_template));
            const auto reports = sweep(tmpl, sw_axis, parse_values(sw_values), sw_workers);
            std::vector<MetricsRow> rows;
            nlohmann::json manifests = nlohmann::json::array();
            for (const auto& r : reports) {
                rows.insert(rows.end(), r.rows.begin(), r.rows.end());
                manifests.push_back(r.manifest);
            }
            write_csv(sw_out, rows);
            if (!sw_manifest.empty()) write_json(sw_manifest, {{"axis", sw_axis}, {"points", manifests}});
            print_rows(rows);
            return report_failures(rows);
        }

        if (*ev) {
            const auto estimate = read_json(ev_estimate);
            const Env env = env_from_json(ev_env.empty() ? estimate.at("env") : read_json(ev_env));
            const auto row = evaluate_estimate_json(estimate, env, expert_cfg(ev_expert));
            write_csv(ev_out, {row});
            print_rows({row});
            return 0;
        }

        if (*ex) {
            auto cfg = ExperimentConfig::from_json(read_json(ex_config));
            if (!ex_out.empty()) cfg.csv_path = ex_out;
            if (!ex_manifest.empty()) cfg.manifest_path = ex_manifest;
            const auto report = ex_robust ? robustness_experiment(cfg) : run_experiment(cfg);
            print_rows(report.rows);
            return report_failures(report.rows);
        }
    } catch (const StageError& e) {
        std::cerr << "error: stage " << e.stage() << ": " << e.what() << '\n';
        return 2;
    } catch (const DatasetFormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
