import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from graphmeta.graph import Graph  # noqa: E402

settings.register_profile("ci", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def random_graph(rng, n, p, multi=False):
    """Erdos-Renyi graph; with ``multi`` some edges get multiplicity 2 or 3."""
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < p
    edges = np.column_stack([iu[0][keep], iu[1][keep]])
    w = rng.integers(1, 4, size=len(edges)) if multi else None
    return Graph.from_edges(n, edges, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves):
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
