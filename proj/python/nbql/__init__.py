"""Net-based Q-learning: epsilon-nets, exact oracles and a regret harness."""

import json

from ._nbql import (
    EpsNet,
    FiniteMDP,
    MetricSpace,
    NbqlError,
    NearestCenter,
    Point,
    ValueTables,
    alpha_weights,
    backward_induction,
    bellman_residual,
    bonus,
    build_greedy_net,
    covering_dimension_fit,
    discretized_chain,
    fit_regret_slope,
    load_finite_mdp,
    nearest_center,
    q_closed_form,
    random_finite_mdp,
)
from . import _nbql


def run_experiment(**config):
    """Run one experiment. Keyword names follow the JSON config keys."""
    return _nbql._run_experiment(json.dumps(config))


def sweep(axis, values, jobs=1, **config):
    """One run per value of ``axis`` (epsilon, c, K or seed)."""
    return _nbql._sweep(json.dumps(config), axis, [float(v) for v in values], jobs)


__all__ = [
    "EpsNet",
    "FiniteMDP",
    "MetricSpace",
    "NbqlError",
    "NearestCenter",
    "Point",
    "ValueTables",
    "alpha_weights",
    "backward_induction",
    "bellman_residual",
    "bonus",
    "build_greedy_net",
    "covering_dimension_fit",
    "discretized_chain",
    "fit_regret_slope",
    "load_finite_mdp",
    "nearest_center",
    "q_closed_form",
    "random_finite_mdp",
    "run_experiment",
    "sweep",
]
