import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from isggm.data_model import (
    MultiSubjectDataset,
    PairedDataset,
    constant_path,
    eval_covariance,
    generate_nuisance,
    sample_dataset,
)
from isggm.errors import NoSupport
from isggm.kernel_cov import (
    KernelSpec,
    check_support_rule,
    choose_bandwidth,
    default_grid,
    epanechnikov,
    kernel_weights,
    lambda_rate,
    smoothed_cov_inter,
    smoothed_cov_ustat,
    smoothed_cov_within,
)


@pytest.mark.parametrize("u, k", [(0.0, 0.75), (1.0, 0.0), (0.5, 0.5625), (-0.5, 0.5625), (1.5, 0.0)])
def test_epanechnikov_values(u, k):
    assert epanechnikov(u) == pytest.approx(k)


def test_epanechnikov_integrates_to_one():
    u = np.linspace(-1, 1, 200_001)
    assert np.trapezoid(epanechnikov(u), u) == pytest.approx(1.0, abs=1e-9)


@given(st.floats(0.01, 5.0))
def test_single_point_weight(h):
    w, mass, frac = kernel_weights(np.array([0.3]), 0.3, h)
    assert w[0] == pytest.approx(0.75 / h)
    assert mass == pytest.approx(0.75 / h) and frac == 1.0


def test_no_support():
    with pytest.raises(NoSupport):
        kernel_weights(np.array([0.0, 0.1]), 0.9, 0.2)


def test_support_fraction_all_positive():
    _, _, frac = kernel_weights(np.array([0.0, 0.5, 1.0]), 0.5, 0.6)
    assert frac == 1.0


def test_single_observation_is_outer_product(rng):
    x, y = rng.standard_normal((1, 4)), rng.standard_normal((1, 4))
    ds = PairedDataset(np.array([0.4]), x, y)
    sc = smoothed_cov_inter(ds, 0.4, KernelSpec(0.2))
    assert np.allclose(sc.matrix, np.outer(x, y), rtol=0, atol=1e-15)
    sw = smoothed_cov_within(x, np.array([0.4]), 0.4, KernelSpec(0.2))
    assert np.allclose(sw.matrix, np.outer(x, x))
    assert np.linalg.matrix_rank(sw.matrix) == 1


@given(arrays(float, 30, elements=st.floats(-10, 10)))
def test_scalar_within_is_weighted_square_mean(x):
    z = np.linspace(0.3, 0.7, x.size)
    ds = PairedDataset(z, x[:, None], x[:, None])
    w, _, _ = kernel_weights(z, 0.5, 0.5)
    val = smoothed_cov_inter(ds, 0.5, KernelSpec(0.5)).matrix[0, 0]
    assert val >= 0
    assert val == pytest.approx(np.sum(w * x * x) / w.sum(), abs=1e-9)


@given(st.integers(0, 10_000))
def test_within_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    obs = rng.standard_normal((25, 5))
    sc = smoothed_cov_within(obs, rng.uniform(size=25), 0.5, KernelSpec(0.8))
    assert np.max(np.abs(sc.matrix - sc.matrix.T)) <= 1e-12


def _six_node_path():
    off = np.zeros((6, 6))
    for a, b in [(0, 1), (1, 2), (3, 4), (2, 5)]:
        off[a, b] = off[b, a] = 0.3
    return constant_path(off)


def _z_scores(w, a, b, target):
    # entrywise error of the kernel-weighted mean of a_j b_k, in standard errors
    idx = w > 0
    wi = w[idx] / w[idx].mean()
    prods = wi[:, None, None] * a[idx][:, :, None] * b[idx][:, None, :]
    se = prods.std(axis=0, ddof=1) / np.sqrt(idx.sum())
    est = prods.mean(axis=0)
    return np.abs(est - target) / se


def test_inter_targets_signal_covariance():
    path = _six_node_path()
    lx, ly = generate_nuisance(6, 1), generate_nuisance(6, 2)
    ds = sample_dataset(path, lx, ly, 50_000, nuisance_scale=1.0, seed=3)
    h = 50_000 ** -0.2
    sc = smoothed_cov_inter(ds, 0.5, KernelSpec(h))
    w, _, _ = kernel_weights(ds.z, 0.5, h)
    sigma = eval_covariance(path, 0.5)
    assert np.max(_z_scores(w, ds.x, ds.y, sigma)) < 4.5
    assert np.allclose(sc.matrix, (ds.x[w > 0] * w[w > 0, None]).T @ ds.y[w > 0] / w.sum())


def test_within_targets_signal_plus_nuisance():
    path = _six_node_path()
    lx, ly = generate_nuisance(6, 1), generate_nuisance(6, 2)
    ds = sample_dataset(path, lx, ly, 50_000, nuisance_scale=1.0, seed=4)
    h = 50_000 ** -0.2
    w, _, _ = kernel_weights(ds.z, 0.5, h)
    target = eval_covariance(path, 0.5) + lx.matrix
    assert np.max(_z_scores(w, ds.x, ds.x, target)) < 4.5
    # and it is clearly not the signal covariance alone
    sw = smoothed_cov_within(ds.x, ds.z, 0.5, KernelSpec(h))
    assert np.max(np.abs(sw.matrix - eval_covariance(path, 0.5))) > 1.0


def test_ustat_two_subjects_matches_inter(rng):
    z = rng.uniform(size=40)
    a, b = rng.standard_normal((40, 3)), rng.standard_normal((40, 3))
    k = KernelSpec(0.3)
    u = smoothed_cov_ustat(MultiSubjectDataset(z, (a, b)), 0.5, k)
    p = smoothed_cov_inter(PairedDataset(z, a, b), 0.5, k)
    assert np.allclose(u.matrix, p.matrix, atol=1e-14)


def test_ustat_identical_subjects_is_within(rng):
    z = rng.uniform(size=40)
    a = rng.standard_normal((40, 3))
    k = KernelSpec(0.3)
    u = smoothed_cov_ustat(MultiSubjectDataset(z, (a, a, a)), 0.5, k)
    assert np.allclose(u.matrix, smoothed_cov_within(a, z, 0.5, k).matrix, atol=1e-12)


def test_ustat_three_pairs(rng):
    z = rng.uniform(size=40)
    subs = [rng.standard_normal((40, 3)) for _ in range(3)]
    k = KernelSpec(0.3)
    u = smoothed_cov_ustat(MultiSubjectDataset(z, tuple(subs)), 0.5, k)
    pairs = [smoothed_cov_inter(PairedDataset(z, subs[i], subs[j]), 0.5, k).matrix
             for i, j in [(0, 1), (0, 2), (1, 2)]]
    assert np.max(np.abs(u.matrix - np.mean(pairs, axis=0))) <= 1e-12


def test_bandwidth_values():
    assert choose_bandwidth(945, 1.2) == pytest.approx(0.3049, abs=1e-4)
    assert choose_bandwidth(32, 1.0) == pytest.approx(0.5)
    assert choose_bandwidth(500, 2.4) == pytest.approx(2 * choose_bandwidth(500, 1.2))
    with pytest.raises(ValueError):
        choose_bandwidth(1)


def test_support_rule_reports_only():
    z = np.linspace(0, 1, 101)
    worst, ok = check_support_rule(z, default_grid(z, 50), 0.1)
    assert not ok and worst < 0.3
    worst, ok = check_support_rule(z, default_grid(z, 50), 0.5)
    assert ok


def test_lambda_rate_decreases_in_n():
    rates = [lambda_rate(n, 20, choose_bandwidth(n)) for n in (400, 1000, 1500)]
    assert rates[0] > rates[1] > rates[2] > 0
