"""Shared fixtures.

The two session fixtures below hold the expensive simulation output:
a 20-trial reference experiment (both algorithms, T = 5000) and a
50-seed batch of long Algorithm-1 runs (T = 10^4). They are built once
per session, in parallel, and reused by the learning, analysis, and
acceptance tests.
"""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from riskgames.cli import run_experiment, validate_config
from riskgames.games import CournotGame
from riskgames.learning import run_algorithm1

_WORKERS = min(4, os.cpu_count() or 1)

REFERENCE_RAW_CONFIG = {
    "game": "cournot",
    "alphas": [0.4, 0.8],
    "T": 5000,
    "trials": 20,
    "seed": 0,
    "eta": "auto",
    "algorithms": ["algorithm1", "unbiased-fo"],
    "x0": [0.5, 0.5],
}

LONG_HORIZON = 10_000
LONG_SEED_COUNT = 50


def _long_run(key):
    entropy, spawn_key = key
    seed = np.random.SeedSequence(entropy=entropy, spawn_key=spawn_key)
    return run_algorithm1(
        CournotGame(), (0.4, 0.8), LONG_HORIZON, x0=np.array([0.5, 0.5]), seed=seed
    )


@pytest.fixture(scope="session")
def reference_bundle(tmp_path_factory):
    """20 trials of both algorithms at T = 5000 on the Cournot game."""
    out = tmp_path_factory.mktemp("reference-bundle")
    config = validate_config(dict(REFERENCE_RAW_CONFIG))
    return run_experiment(config, out_dir=str(out), workers=_WORKERS)


@pytest.fixture(scope="session")
def cournot_long_traces():
    """50 seeded Algorithm-1 runs at T = 10^4."""
    seeds = np.random.SeedSequence(2024).spawn(LONG_SEED_COUNT)
    keys = [(s.entropy, s.spawn_key) for s in seeds]
    with ProcessPoolExecutor(max_workers=_WORKERS) as pool:
        return list(pool.map(_long_run, keys))
