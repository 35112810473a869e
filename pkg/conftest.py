"""
Shared pytest fixtures: parameter profiles, standard graphs, seeded generators and
helpers that build run definitions and config files.
"""
import json

import numpy as np
import pytest

from app.topology import default_weights, make_star, make_two_client_loop
from models.models import NodeSetup, ProtocolParams, SimulationConfig, Topology

EQ15 = ProtocolParams(kappa1=1.1, kappa2=1.0, p=0.99, tau=1.0, c=0.7)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long simulations and full reproduction suites (deselect with -m \"not slow\")")


@pytest.fixture
def eq15() -> ProtocolParams:
    """Gains kappa1=1.1, kappa2=1.0, p=0.99 with tau=1 s and c=0.7."""
    return EQ15


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)


@pytest.fixture
def star() -> Topology:
    return default_weights(make_star(2), EQ15.c)


@pytest.fixture
def loop() -> Topology:
    return default_weights(make_two_client_loop(), EQ15.c)


def make_run(topology: Topology, params: ProtocolParams, skews, steps: int = 100, seed: int = 1,
             x0=None, **extra) -> SimulationConfig:
    """Run definition over a weighted topology with skewless nodes."""
    x0 = x0 if x0 is not None else [0.0] * len(skews)
    nodes = tuple(NodeSetup(node_id=i + 1, r=float(r), x0=float(x)) for i, (r, x) in enumerate(zip(skews, x0)))
    return SimulationConfig(topology=topology, params=params, nodes=nodes, steps=steps, seed=seed, **extra)


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict (or raw text) to a file and return its path."""
    def _write(content, name: str = "config.json"):
        path = tmp_path / name
        path.write_text(content if isinstance(content, str) else json.dumps(content, indent=2), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def star_config() -> dict:
    """Leader plus one drifting client measuring it, eq15 gains."""
    return {
        "version": 1,
        "nodes": [{"id": 1, "r": 1.0}, {"id": 2, "r": 1.00002, "x0": 0.001}],
        "edges": [{"from": 2, "to": 1}],
        "weights": {"mode": "paper-eq15", "c": 0.7},
        "params": {"kappa1": 1.1, "kappa2": 1.0, "p": 0.99, "tau": 1.0},
        "run": {"steps": 300, "seed": 1},
    }
