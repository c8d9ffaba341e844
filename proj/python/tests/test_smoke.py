import json
import math

import numpy as np
import pytest

import pqr

MDP2X2 = {"fixture": "mdp2x2"}


def test_solve_soft_invariants():
    sol = pqr.solve_soft(MDP2X2, tol=1e-12)
    assert sol["converged"]
    q, v, pi = sol["q"], sol["v"], sol["policy"]
    assert q.shape == (2, 2)
    np.testing.assert_allclose(v, np.log(np.exp(q).sum(axis=1)), atol=1e-9)
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(pqr.soft_bellman_backup(MDP2X2, q), q, atol=1e-10)


def test_env_spec_expands_fixtures():
    env = pqr.env_spec(MDP2X2)
    assert env["gamma"] == 0.5
    assert pqr.env_spec({"p": 3, "seed": 1})["p"] == 3


def test_dataset_round_trip(tmp_path):
    ds = pqr.generate(MDP2X2, 200, 4)
    assert len(ds) == 200
    assert ds.states.shape == (200, 1)
    assert set(ds.actions) <= {0, 1}
    path = str(tmp_path / "d.jsonl")
    ds.save(path)
    assert pqr.Dataset.load(path) == ds
    assert pqr.generate(MDP2X2, 200, 4) == ds


def test_exact_pipeline_recovers_reward():
    env = {"fixture": "random", "n_states": 5, "n_actions": 3, "seed": 2}
    sol = pqr.solve_soft(env, tol=1e-12)
    ds = pqr.generate(env, 300, 1)
    run = pqr.pqr(ds, {"mode": "known_transition"}, exact_policy=True)
    truth = np.array(pqr.env_spec(env)["reward"])
    np.testing.assert_allclose(run.reward_table(), truth, atol=1e-6)
    np.testing.assert_allclose(run.q_table(), sol["q"], atol=1e-6)
    assert run.q([1.0], 0) == run.q([1.0], 0)
    assert "fqi_rounds" in json.loads(run.manifest)


def test_shaping_probe_constant_potential():
    out = pqr.shaping_probe(MDP2X2, np.array([1.0, 1.0]))
    np.testing.assert_allclose(out, np.array([[0.5, 1.5], [0.5, 1.0]]), atol=1e-12)


def test_spl_gd_with_python_oracles():
    ds = pqr.generate({"fixture": "random", "n_states": 6, "n_actions": 3, "seed": 3}, 400, 2)
    coef, names = pqr.spl_gd(ds, lambda s, a: 2.0 * s[0] - a + 1.0, lambda s: 0.0, 0.0)
    assert names == ["s1", "a", "1"]
    np.testing.assert_allclose(coef, [2.0, -1.0, 1.0], atol=1e-9)


def test_select_alpha_zero_total_raises():
    env = {"fixture": "random", "n_states": 3, "n_actions": 2, "seed": 4}
    ds = pqr.generate(env, 50, 1)
    with pytest.raises(ValueError):
        pqr.select_alpha(ds, 0.1, 0.9, {"mode": "known_transition"}, exact_policy=False, env={"fixture": "mdp2x2"})


def test_stage_error_names_the_stage(tmp_path):
    env = pqr.env_spec(MDP2X2)
    lines = [json.dumps({"env": env, "gamma": 0.5, "alpha": 1.0, "seed": 0, "T": 4})]
    for t in range(4):
        lines.append(json.dumps({"traj": 0, "t": t, "s": [t % 2], "a": 1, "s_next": [(t + 1) % 2]}))
    path = tmp_path / "no_anchor.jsonl"
    path.write_text("\n".join(lines) + "\n")
    ds = pqr.Dataset.load(str(path))
    with pytest.raises(pqr.StageError, match="fqi"):
        pqr.pqr(ds, {"mode": "tabular_average"})


def test_experiment_rows_follow_the_schema():
    rows, manifest = pqr.run_experiment(
        {
            "env": MDP2X2,
            "dataset": {"T": 2000},
            "pqr": {"mode": "tabular_average"},
            "report_runtime": False,
            "seed": 2,
        }
    )
    assert [r["method"] for r in rows] == ["pqr", "maxent", "splgd"]
    assert all(r["ok"] for r in rows)
    assert set(pqr.csv_columns) <= set(rows[0])
    assert math.isnan(rows[2]["mse_q"])
    assert manifest["failures"] == []


def test_sweep_isolates_bad_points():
    reports = pqr.sweep(
        {"env": MDP2X2, "dataset": {"T": 500}, "methods": ["maxent"], "seed": 1}, "gamma", [0.3, 2.0]
    )
    assert reports[0][0][0]["ok"]
    assert not reports[1][0][0]["ok"]
    assert reports[1][0][0]["stage"] == "config"
