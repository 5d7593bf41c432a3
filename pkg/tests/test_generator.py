import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from graphmeta.generator import (
    DcCsbmParams,
    WorldParams,
    assign_classes,
    augmented_degree_mean,
    calibrate_gini,
    cluster_sizes,
    expected_degree,
    measure_gini,
    normalize_theta,
    sparse_regime_params,
    sample_block_edges,
    sample_dc_csbm,
    sample_theta_powerlaw,
    sample_world,
    simplex_centers,
)
from graphmeta.graph import degree_vector
from graphmeta.properties import gini_degree

SMALL_WORLD = WorldParams(n=2000)


def flat(n, d=4, p=0.01, q=0.01, seed=0, theta=None):
    return DcCsbmParams(n, np.zeros(d), np.zeros(d), p, q, theta, seed)


# ------------------------------------------------------------------ classes


def test_assign_classes_deterministic():
    assert np.array_equal(assign_classes(50, 3), assign_classes(50, 3))
    assert not np.array_equal(assign_classes(50, 3), assign_classes(50, 4))
    assert assign_classes(1, 0)[0] in (0, 1)


def test_assign_classes_balance_matches_hoeffding():
    # P(|frac - 1/2| > 0.01) <= 2 exp(-2 n 0.01^2) ~ 4e-9 per seed
    fracs = np.array([assign_classes(100_000, s).mean() for s in range(100)])
    assert np.all(np.abs(fracs - 0.5) <= 0.01)


def test_cluster_sizes():
    assert cluster_sizes(10, 3, 0.0).tolist() == [4, 3, 3]
    s = cluster_sizes(2000, 4, 0.5)
    assert s.sum() == 2000 and np.all(np.diff(s) > 0)
    assert np.allclose(s / 2000, np.array([1, 1.5, 2, 2.5]) / 7, atol=1e-3)


# -------------------------------------------------------------------- theta


def test_theta_class_sums_and_bounds():
    y = assign_classes(3000, 1)
    for expo in (1.3, 2.0, 5.0):
        th = sample_theta_powerlaw(3000, y, expo, seed=2)
        for c in (0, 1):
            assert abs(th[y == c].sum() - (y == c).sum()) < 1e-9
        assert th.min() > 0 and th.max() <= 3000


def test_all_ones_theta_sums_exactly():
    y = assign_classes(101, 0)
    th = normalize_theta(np.ones(101), y, 101.0)
    assert th[y == 0].sum() == (y == 0).sum() and th[y == 1].sum() == (y == 1).sum()


def test_theta_max_is_respected_by_water_filling():
    y = np.zeros(10, dtype=int)
    th = normalize_theta([100.0] + [0.1] * 9, y, 3.0)
    assert th.max() <= 3.0 + 1e-12 and th.sum() == pytest.approx(10.0, abs=1e-12)
    assert th[0] == 3.0 and np.allclose(th[1:], 7 / 9)
    with pytest.raises(ValueError):
        normalize_theta(np.ones(4), np.zeros(4, dtype=int), 0.5)


def test_theta_rejects_bad_exponent():
    with pytest.raises(ValueError):
        sample_theta_powerlaw(10, np.zeros(10, dtype=int), 1.0)


def test_large_exponent_gives_low_gini():
    vals = [gini_degree(sample_world(replace(SMALL_WORLD, power_exponent=50.0, seed=s))[0]) for s in range(10)]
    assert max(vals) < 0.15


def test_heavier_tail_gives_higher_gini_paired():
    wins = 0
    for s in range(10):
        g15 = gini_degree(sample_world(replace(SMALL_WORLD, power_exponent=1.5, seed=s))[0])
        g30 = gini_degree(sample_world(replace(SMALL_WORLD, power_exponent=3.0, seed=s))[0])
        wins += g15 > g30
    assert wins >= 9


# -------------------------------------------------------------------- edges


def test_block_edges_match_pair_intensities():
    # every unordered pair should carry Poisson(theta_i theta_j B) edges
    theta = np.array([0.5, 1.0, 1.5, 2.0, 0.7, 1.3])
    blocks = np.array([0, 0, 0, 1, 1, 1])
    B = np.array([[0.3, 0.1], [0.1, 0.2]])
    rng = np.random.default_rng(7)
    reps = 4000
    counts = np.zeros((6, 6))
    for _ in range(reps):
        e = sample_block_edges(rng, theta, blocks, B)
        np.add.at(counts, (np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])), 1)
    for i in range(6):
        assert counts[i, i] == 0
        for j in range(i + 1, 6):
            lam = theta[i] * theta[j] * B[blocks[i], blocks[j]]
            se = math.sqrt(lam / reps)
            assert abs(counts[i, j] / reps - lam) < 5 * se


def test_dc_csbm_graph_shape():
    g, x, y = sample_dc_csbm(flat(300, p=0.05, q=0.02, seed=3))
    a = g.adj
    assert (a != a.T).nnz == 0 and a.diagonal().sum() == 0
    assert x.shape == (300, 4) and set(np.unique(y)) <= {0, 1}


def test_dc_csbm_deterministic():
    p = replace(flat(200, seed=9), theta=np.linspace(0.5, 2, 200))
    a, b = sample_dc_csbm(p), sample_dc_csbm(p)
    assert a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])


def test_flat_mean_degree_within_three_sigma():
    n, p = 400, 0.02
    means = [degree_vector(sample_dc_csbm(flat(n, p=p, q=p, seed=s))[0]).mean() for s in range(50)]
    lam = (n - 1) / 2 * (p + p)
    # total degree sum is 2 * Poisson(n(n-1)/2 p) in expectation per seed
    sigma = 2 * math.sqrt(n * (n - 1) / 2 * p) / n / math.sqrt(50)
    assert abs(np.mean(means) - lam) < 3 * sigma


def test_augmented_degree_formula_value():
    assert augmented_degree_mean(1000, 1.0, 0.01, 0.01) == pytest.approx(10.99)


def test_expected_degree_matches_empirical():
    n = 600
    y = assign_classes(n, 5)
    theta = normalize_theta(np.linspace(0.2, 3, n), y, n)
    params = DcCsbmParams(n, np.zeros(2), np.zeros(2), 0.03, 0.01, theta, 0)
    deg = np.zeros(n)
    for s in range(40):
        deg += degree_vector(sample_dc_csbm(replace(params, seed=s), labels=y)[0])
    want = expected_degree(theta, y, 0.03, 0.01)
    z = (deg / 40 - want) / np.sqrt(want / 40)
    assert np.mean(np.abs(z) < 4) >= 0.99


def test_identical_means_give_indistinguishable_features():
    rejections = 0
    for s in range(20):
        _, x, y = sample_dc_csbm(flat(400, d=1, seed=s))
        rejections += stats.ttest_ind(x[y == 0, 0], x[y == 1, 0]).pvalue < 0.01
    assert rejections <= 2


def test_feature_distribution():
    mu, nu = np.array([0.6, 0.0]), np.array([0.0, -0.8])
    _, x, y = sample_dc_csbm(DcCsbmParams(20000, mu, nu, 1e-4, 1e-4, None, 1))
    assert np.allclose(x[y == 0].mean(axis=0), mu, atol=0.02)
    assert np.allclose(x[y == 1].var(axis=0), 0.5, atol=0.03)


def test_dense_intensity_warns():
    with pytest.warns(RuntimeWarning, match="sparse regime"):
        sample_dc_csbm(flat(20, p=0.9, q=0.5, theta=np.r_[np.full(19, 0.1), 18.1]))


def test_param_validation():
    with pytest.raises(ValueError):
        DcCsbmParams(10, np.ones(2), np.zeros(2), 0.1, 0.1)
    with pytest.raises(ValueError):
        DcCsbmParams(10, np.zeros(2), np.zeros(2), 0.0, 0.1)
    with pytest.raises(ValueError):
        DcCsbmParams(3, np.zeros(2), np.zeros(2), 0.1, 0.1, np.array([1.0, 1.0, 4.0]))
    with pytest.raises(ValueError):
        WorldParams(power_exponent=1.0)
    with pytest.raises(ValueError):
        WorldParams(num_clusters=1)


def test_sparse_regime_params():
    p = sparse_regime_params(1000, 8, gamma=0.5)
    assert p.gamma == pytest.approx(0.5)
    assert p.p_intra + p.q_inter == pytest.approx(math.log(1000) ** 3 / 1000)
    assert np.linalg.norm(p.mu - p.nu) == pytest.approx(1.0)


# -------------------------------------------------------------------- world


def test_simplex_centers_equidistant():
    c = simplex_centers(4, 16, 0.5)
    d = np.linalg.norm(c[:, None] - c[None], axis=2)
    assert np.allclose(d[~np.eye(4, dtype=bool)], 0.5)
    assert np.allclose(c.mean(axis=0), 0)


def test_world_equal_sizes_with_zero_slope():
    _, _, y = sample_world(replace(SMALL_WORLD, cluster_size_slope=0.0, n=1001))
    sizes = np.bincount(y)
    assert sizes.max() - sizes.min() <= 1


def test_world_realized_average_degree():
    for s in range(10):
        g, _, _ = sample_world(replace(SMALL_WORLD, seed=s))
        assert abs(2 * g.m / g.n - 30) / 30 < 0.05


def test_world_homophily_follows_ratio():
    g, _, y = sample_world(replace(SMALL_WORLD, cluster_size_slope=0.0, power_exponent=50.0))
    u, v, w = g.edge_array()
    same = w[y[u] == y[v]].sum() / w.sum()
    # 4 equal clusters with p/q = 4: intra share 4 / (4 + 3)
    assert same == pytest.approx(4 / 7, abs=0.02)


def test_world_features():
    _, x, y = sample_world(replace(SMALL_WORLD, feature_cluster_variance=0.2))
    for c in range(4):
        assert np.allclose(x[y == c].var(axis=0), 0.2, rtol=0.25)


def test_world_deterministic_and_infeasible():
    a, b = sample_world(SMALL_WORLD), sample_world(SMALL_WORLD)
    assert a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
    with pytest.raises(ValueError):
        sample_world(WorldParams(n=20, average_degree=20, feature_dim=4))


# -------------------------------------------------------------- calibration


def test_calibration_fixed_point():
    here = measure_gini(SMALL_WORLD)
    cal = calibrate_gini(SMALL_WORLD, here, full_output=True)
    assert cal.iterations <= 1 and cal.params == SMALL_WORLD


def test_calibration_hits_target_on_fresh_seeds():
    cal = calibrate_gini(SMALL_WORLD, 0.35, full_output=True)
    assert abs(cal.measured - 0.35) < 0.02
    fresh = measure_gini(replace(cal.params, seed=987654))
    assert 0.33 - 0.01 <= fresh <= 0.37 + 0.01


def test_calibration_range_error():
    with pytest.raises(ValueError, match="achievable interval"):
        calibrate_gini(SMALL_WORLD, 0.99)


def test_gini_decreasing_in_exponent():
    vals = [measure_gini(replace(SMALL_WORLD, power_exponent=e)) for e in (1.6, 2.0, 3.0, 6.0, 50.0)]
    assert np.all(np.diff(vals) < 0)


@pytest.mark.slow
def test_calibration_at_full_scale():
    base = WorldParams()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cal = calibrate_gini(base, 0.35, full_output=True)
    assert 0.33 <= measure_gini(replace(cal.params, seed=4242)) <= 0.37
