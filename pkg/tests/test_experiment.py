import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from graphmeta.experiment import (
    CELL_COLUMNS,
    ClassifierConfig,
    ExperimentSpec,
    measure,
    run_experiment,
    spearman,
    split_indices,
    train_proxy_classifier,
    write_trend,
)
from graphmeta.generator import WorldParams, sample_world
from graphmeta.separability import convolve

TINY = WorldParams(n=400, average_degree=10)


def test_split_partition():
    tr, va, te = split_indices(100, 3)
    assert (len(tr), len(va), len(te)) == (60, 20, 20)
    assert sorted(np.concatenate([tr, va, te]).tolist()) == list(range(100))
    assert np.array_equal(split_indices(100, 3)[0], tr)
    with pytest.raises(ValueError):
        split_indices(10, 0, (0.5, 0.5, 0.5))


def test_classifier_separated_classes():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 3, 300)
    x = np.eye(3)[y] * 5 + 0.01 * rng.standard_normal((300, 3))
    assert train_proxy_classifier(x, y, split_indices(300, 1)) == 1.0


def test_classifier_chance_on_shuffled_labels():
    rng = np.random.default_rng(1)
    for c in (2, 4):
        x = rng.standard_normal((4000, 8))
        y = rng.integers(0, c, 4000)
        acc = train_proxy_classifier(x, y, split_indices(4000, 2))
        assert abs(acc - 1 / c) < 0.05


def test_classifier_deterministic_and_raw_mode():
    g, x, y = sample_world(TINY)
    cf = convolve(g, x)
    split = split_indices(g.n, 5)
    a = train_proxy_classifier(cf, y, split)
    assert a == train_proxy_classifier(cf, y, split)
    raw = train_proxy_classifier(cf, y, split, ClassifierConfig(raw=True), raw_features=x)
    assert 0 <= raw <= 1
    with pytest.raises(ValueError):
        train_proxy_classifier(cf, y, split, ClassifierConfig(raw=True))


def test_classifier_degenerate_split():
    x = np.zeros((10, 2))
    y = np.array([0] * 5 + [1] * 5)
    with pytest.raises(ValueError, match="degenerate"):
        train_proxy_classifier(x, y, (np.arange(5), np.array([], int), np.arange(5, 10)))
    with pytest.raises(ValueError, match="degenerate"):
        train_proxy_classifier(x, y, (np.arange(10), np.array([], int), np.array([], int)))


@given(st.lists(st.tuples(st.integers(-5, 5), st.floats(-10, 10)), min_size=2, max_size=10))
def test_spearman_matches_bruteforce(pairs):
    a = [p[0] for p in pairs]
    b = [p[1] for p in pairs]
    got, want = spearman(a, b), oracles.spearman_bruteforce(a, b)
    if math.isnan(want):
        assert math.isnan(got)
    else:
        assert got == pytest.approx(want, abs=1e-12)
        assert -1 <= got <= 1


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(TINY, "diameter", (1, 2))
    with pytest.raises(ValueError):
        ExperimentSpec(TINY, "average_degree", (1, 2), split=(0.5, 0.5, 0.5))


def test_small_experiment_outputs_are_reproducible(tmp_path):
    spec = ExperimentSpec(TINY, "average_degree", (5, 10, 20), seeds=2)
    res = run_experiment(spec)
    assert len(res.cells) == 6 and all(p["status"] == "ok" for p in res.points)
    assert all(p["accuracy_sd"] >= 0 for p in res.points)
    a = write_trend(res, tmp_path / "a")
    b = write_trend(run_experiment(spec, n_jobs=2), tmp_path / "b")
    for key in ("cells", "points", "summary", "chart"):
        assert open(a[key], "rb").read() == open(b[key], "rb").read()
    header = open(a["cells"]).readline().strip().split(",")
    assert tuple(header) == CELL_COLUMNS
    assert open(a["chart"]).read().startswith("<?xml")


def test_measured_value_reverified_on_regenerated_graph():
    spec = ExperimentSpec(TINY, "feature_cluster_variance", (0.05, 0.5), seeds=1)
    res = run_experiment(spec)
    for cell in res.cells:
        p = replace(TINY, feature_cluster_variance=cell["grid_value"], seed=cell["seed"])
        g, x, y = sample_world(p)
        assert abs(measure(spec.variable, g, x, y) - cell["measured"]) <= 1e-12
        assert g.m == cell["m"]


def test_failed_point_is_annotated():
    spec = ExperimentSpec(TINY, "gini_degree", (0.99, 0.3), seeds=1)
    res = run_experiment(spec)
    assert 0 in res.failures and "achievable" in res.failures[0]
    assert res.points[0]["status"].startswith("failed") and res.points[1]["status"] == "ok"
    assert math.isnan(res.spearman)
