"""PQR inverse reinforcement learning with anchor actions."""

import json as _json

from . import _core
from ._core import Dataset, DatasetFormatError, PqrRun, StageError, csv_columns

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "PqrRun",
    "StageError",
    "csv_columns",
    "env_spec",
    "generate",
    "pqr",
    "run_experiment",
    "select_alpha",
    "shaping_probe",
    "soft_bellman_backup",
    "solve_soft",
    "spl_gd",
    "sweep",
]


def _dump(obj):
    if obj is None:
        return ""
    return obj if isinstance(obj, str) else _json.dumps(obj)


def env_spec(spec):
    """Expanded environment JSON as a dict."""
    return _json.loads(_core.env_json(_dump(spec)))


def solve_soft(env, tol=1e-10, max_iter=1_000_000):
    return _core.solve_soft(_dump(env), tol, max_iter)


def soft_bellman_backup(env, q):
    return _core.soft_bellman_backup(_dump(env), q)


def shaping_probe(env, phi):
    return _core.shaping_probe(_dump(env), phi)


def generate(env, steps, seed, expert=None):
    return _core.generate(_dump(env), steps, seed, _dump(expert))


def pqr(dataset, config=None, env=None, exact_policy=False):
    return _core.pqr(dataset, _dump(config or {}), _dump(env), exact_policy)


def spl_gd(dataset, q, v, gamma):
    """Returns (coefficients, column names)."""
    return _core.spl_gd(dataset, q, v, gamma)


def select_alpha(dataset, r_avg, gamma, config=None, env=None, exact_policy=False):
    return _core.select_alpha(dataset, r_avg, gamma, _dump(config or {}), _dump(env), exact_policy)


def run_experiment(config):
    """Returns (rows, manifest)."""
    rows, manifest = _core.run_experiment(_dump(config))
    return rows, _json.loads(manifest)


def sweep(config, axis, values, workers=1):
    return [(rows, _json.loads(m)) for rows, m in _core.sweep(_dump(config), axis, list(values), workers)]
