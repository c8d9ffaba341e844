#include "pqr/fixtures.hpp"
#include "pqr/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pqr;
using json = nlohmann::json;

namespace {

Env parse_env(const std::string& text) { return env_from_json(json::parse(text)); }

const TabularMdp& tabular(const Env& env) {
    if (const auto* t = std::get_if<TabularMdp>(&env)) return *t;
    throw std::invalid_argument("operation needs a tabular env");
}

py::dict solution_dict(const SoftSolution& sol) {
    py::dict d;
    d["q"] = sol.q;
    d["v"] = sol.v;
    d["policy"] = sol.policy;
    d["residual"] = sol.residual;
    d["iterations"] = sol.iterations;
    d["converged"] = sol.converged;
    return d;
}

py::dict row_dict(const MetricsRow& r) {
    py::dict d;
    d["method"] = r.method;
    d["env"] = r.env;
    d["p"] = r.p;
    d["T"] = r.T;
    d["gamma_data"] = r.gamma_data;
    d["gamma_method"] = r.gamma_method;
    d["alpha_data"] = r.alpha_data;
    d["alpha_method"] = r.alpha_method;
    d["mse_r"] = r.mse_r;
    d["mse_q"] = r.mse_q;
    d["runtime_s"] = r.runtime_s;
    d["seed"] = r.seed;
    d["ok"] = r.ok;
    d["stage"] = r.stage;
    d["error"] = r.error;
    return d;
}

py::tuple report_tuple(const MetricsReport& rep) {
    py::list rows;
    for (const auto& r : rep.rows) rows.append(row_dict(r));
    return py::make_tuple(rows, rep.manifest.dump());
}

Matrix states_of(const TrajectoryDataset& ds, bool next) {
    const auto dim = ds.empty() ? 0 : static_cast<Eigen::Index>(ds.transitions.front().s.size());
    Matrix m(static_cast<Eigen::Index>(ds.size()), dim);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto& tr = ds.transitions[static_cast<std::size_t>(i)];
        const auto& s = next ? tr.s_next : tr.s;
        for (Eigen::Index k = 0; k < dim; ++k) m(i, k) = s[static_cast<std::size_t>(k)];
    }
    return m;
}

struct PyRun {
    PqrRun run;
    Env env;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "PQR inverse reinforcement learning core";

    py::register_exception<StageError>(m, "StageError", PyExc_RuntimeError);
    py::register_exception<DatasetFormatError>(m, "DatasetFormatError", PyExc_ValueError);

    m.def("env_json", [](const std::string& spec) { return env_to_json(parse_env(spec)).dump(); }, py::arg("spec"),
          "Fully expanded JSON of an environment spec (fixtures included).");

    m.def("solve_soft",
          [](const std::string& env, double tol, long max_iter) {
              return solution_dict(solve_soft(tabular(parse_env(env)), tol, max_iter));
          },
          py::arg("env"), py::arg("tol") = 1e-10, py::arg("max_iter") = 1'000'000);

    m.def("soft_bellman_backup",
          [](const std::string& env, const Matrix& q) { return soft_bellman_backup(tabular(parse_env(env)), q); },
          py::arg("env"), py::arg("q"));

    m.def("shaping_probe",
          [](const std::string& env, const Vector& phi) { return shaping_probe(tabular(parse_env(env)), phi); },
          py::arg("env"), py::arg("phi"));

    py::class_<TrajectoryDataset>(m, "Dataset")
        .def("__len__", &TrajectoryDataset::size)
        .def_property_readonly("states", [](const TrajectoryDataset& ds) { return states_of(ds, false); })
        .def_property_readonly("next_states", [](const TrajectoryDataset& ds) { return states_of(ds, true); })
        .def_property_readonly("actions",
                               [](const TrajectoryDataset& ds) {
                                   std::vector<int> a;
                                   for (const auto& tr : ds.transitions) a.push_back(tr.a);
                                   return a;
                               })
        .def_property_readonly("env", [](const TrajectoryDataset& ds) { return ds.meta.env.dump(); })
        .def_property_readonly("seed", [](const TrajectoryDataset& ds) { return ds.meta.seed; })
        .def("save", [](const TrajectoryDataset& ds, const std::string& path) { save_dataset(ds, path); })
        .def_static("load", [](const std::string& path) { return load_dataset(path); })
        .def("__eq__", [](const TrajectoryDataset& a, const TrajectoryDataset& b) { return a == b; });

    m.def("generate",
          [](const std::string& env_spec, long steps, std::uint64_t seed, const std::string& expert) {
              const Env env = parse_env(env_spec);
              const auto cfg = expert.empty() ? FittedSoftQConfig{} : FittedSoftQConfig::from_json(json::parse(expert));
              py::gil_scoped_release release;
              const auto truth = ground_truth(env, cfg);
              return rollout(env, truth.policy, steps, seed, truth.descriptor);
          },
          py::arg("env"), py::arg("steps"), py::arg("seed"), py::arg("expert") = "",
          "Roll out the soft-optimal expert of an environment.");

    py::class_<PyRun>(m, "PqrRun")
        .def("reward", [](const PyRun& r, const std::vector<double>& s, int a) { return r.run.reward(s, a); })
        .def("q", [](const PyRun& r, const std::vector<double>& s, int a) { return r.run.fqi.q.q_value(s, a); })
        .def("log_policy",
             [](const PyRun& r, const std::vector<double>& s, int a) { return r.run.policy->log_prob(s, a); })
        .def("reward_table",
             [](const PyRun& r) {
                 const auto& t = tabular(r.env);
                 return r.run.reward.tabulate(t.n_states, t.n_actions);
             })
        .def("q_table",
             [](const PyRun& r) {
                 const auto& t = tabular(r.env);
                 const auto& q = r.run.fqi.q;
                 return tabulate([&q](StateView s, int a) { return q.q_value(s, a); }, t.n_states, t.n_actions);
             })
        .def_property_readonly("manifest", [](const PyRun& r) { return r.run.manifest.dump(); });

    m.def("pqr",
          [](const TrajectoryDataset& ds, const std::string& config, const std::string& env_spec, bool exact) {
              const Env env = env_spec.empty() ? env_from_json(ds.meta.env) : parse_env(env_spec);
              json cj = json::parse(config);
              if (!cj.contains("gamma")) cj["gamma"] = env_gamma(env);
              if (!cj.contains("alpha")) cj["alpha"] = env_alpha(env);
              const auto cfg = PqrConfig::from_json(cj);
              py::gil_scoped_release release;
              std::shared_ptr<const PolicyEstimate> override_policy;
              if (exact) override_policy = ground_truth(env, FittedSoftQConfig{}).policy_estimate;
              return PyRun{pqr_full(ds, cfg, env, override_policy), env};
          },
          py::arg("dataset"), py::arg("config") = "{}", py::arg("env") = "", py::arg("exact_policy") = false);

    m.def("spl_gd",
          [](const TrajectoryDataset& ds, const std::function<double(std::vector<double>, int)>& q,
             const std::function<double(std::vector<double>)>& v, double gamma) {
              const auto res = spl_gd(
                  ds, [&q](StateView s, int a) { return q(std::vector<double>(s.begin(), s.end()), a); },
                  [&v](StateView s) { return v(std::vector<double>(s.begin(), s.end())); }, gamma);
              return py::make_tuple(res.coefficients, res.names);
          },
          py::arg("dataset"), py::arg("q"), py::arg("v"), py::arg("gamma"));

    m.def("select_alpha",
          [](const TrajectoryDataset& ds, double r_avg, double gamma, const std::string& config,
             const std::string& env_spec, bool exact) {
              const Env env = env_spec.empty() ? env_from_json(ds.meta.env) : parse_env(env_spec);
              py::gil_scoped_release release;
              std::shared_ptr<const PolicyEstimate> override_policy;
              if (exact) override_policy = ground_truth(env, FittedSoftQConfig{}).policy_estimate;
              return select_alpha(ds, r_avg, gamma, PqrConfig::from_json(json::parse(config)), env, override_policy)
                  .alpha_hat;
          },
          py::arg("dataset"), py::arg("r_avg"), py::arg("gamma"), py::arg("config") = "{}", py::arg("env") = "",
          py::arg("exact_policy") = false);

    m.def("run_experiment",
          [](const std::string& config) {
              const auto cfg = ExperimentConfig::from_json(json::parse(config));
              MetricsReport rep;
              {
                  py::gil_scoped_release release;
                  rep = run_experiment(cfg);
              }
              return report_tuple(rep);
          },
          py::arg("config"));

    m.def("sweep",
          [](const std::string& config, const std::string& axis, const std::vector<double>& values, int workers) {
              const auto cfg = ExperimentConfig::from_json(json::parse(config));
              std::vector<MetricsReport> reps;
              {
                  py::gil_scoped_release release;
                  reps = sweep(cfg, axis, values, workers);
              }
              py::list out;
              for (const auto& r : reps) out.append(report_tuple(r));
              return out;
          },
          py::arg("config"), py::arg("axis"), py::arg("values"), py::arg("workers") = 1);

    m.attr("csv_columns") = csv_columns();
}
