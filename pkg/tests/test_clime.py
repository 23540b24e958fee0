import numpy as np
import pytest
from hypothesis import given, strategies as st

from isggm.clime import (
    ClimeConfig,
    clime_column,
    clime_full,
    cross_validate_lambda,
    symmetrize_min_magnitude,
    write_cv_table,
)
from isggm.data_model import simulate
from isggm.errors import ColumnErrors, Infeasible
from isggm.kernel_cov import KernelSpec, choose_bandwidth, default_grid, lambda_rate
from isggm.simplex import solve_lp

from conftest import random_spd
from lp_oracle import clime_column_reference


@pytest.mark.parametrize("d", [1, 3, 10])
def test_identity_column(d):
    theta = clime_column(np.eye(d), 0, 0.2)
    expected = np.zeros(d)
    expected[0] = 0.8
    assert np.max(np.abs(theta - expected)) <= 1e-8


def test_exact_solve_at_zero_lambda():
    theta = clime_column(2 * np.eye(4), 1, 0.0)
    assert np.allclose(theta, [0, 0.5, 0, 0], atol=1e-12)


@given(st.integers(0, 100_000), st.integers(0, 4))
def test_column_matches_reference(seed, j):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, 5)
    theta = clime_column(s, j, 0.05)
    ref_obj, _ = clime_column_reference(s, j, 0.05)
    assert abs(np.abs(theta).sum() - ref_obj) <= 1e-6
    e = np.eye(5)[:, j]
    assert np.max(np.abs(s @ theta - e)) <= 0.05 + 1e-8


@given(st.integers(0, 100_000))
def test_bland_only_agrees(seed):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, 4)
    a = clime_column(s, 2, 0.1)
    c, A, b = np.ones(8), np.block([[s, -s], [-s, s]]), np.r_[0.1 + np.eye(4)[2], 0.1 - np.eye(4)[2]]
    res = solve_lp(c, A, b, bland_only=True)
    assert res.status == "optimal"
    assert res.fun == pytest.approx(np.abs(a).sum(), abs=1e-9)


def test_degenerate_tiny_pivot_not_taken():
    # within-subject estimate where Dantzig once pivoted on a 1e-9 entry
    # and declared a feasible column infeasible
    from pathlib import Path
    sigma = np.load(Path(__file__).parent / "data" / "degenerate_within_sigma.npy")
    for j in (0, 13, 19):
        theta = clime_column(sigma, j, 0.0)
        ref, _ = clime_column_reference(sigma, j, 0.0)
        assert abs(np.abs(theta).sum() - ref) < 1e-6 * max(1.0, ref)


@given(st.integers(0, 100_000))
def test_ill_scaled_zero_lambda_matches_reference(seed):
    rng = np.random.default_rng(seed)
    d = 8
    q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    sigma = (q * np.geomspace(1e-2, 1e2, d)) @ q.T
    sigma = (sigma + sigma.T) / 2
    j = int(rng.integers(d))
    theta = clime_column(sigma, j, 0.0)
    ref, _ = clime_column_reference(sigma, j, 0.0)
    assert abs(np.abs(theta).sum() - ref) < 1e-6 * max(1.0, ref)


def test_solve_lp_general_and_infeasible():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6 -> (1.6, 1.2)
    res = solve_lp(np.array([-1.0, -1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]), np.array([4.0, 6.0]))
    assert res.status == "optimal"
    assert np.allclose(res.x, [1.6, 1.2])
    # x <= -1 with x >= 0 is infeasible
    res = solve_lp(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]))
    assert res.status == "infeasible"
    # phase one with a reachable negative bound: -x <= -2 -> x = 2
    res = solve_lp(np.array([1.0]), np.array([[-1.0]]), np.array([-2.0]))
    assert res.status == "optimal" and res.x[0] == pytest.approx(2.0)


def test_singular_sigma_at_zero_lambda_is_infeasible():
    s = np.zeros((3, 3))
    with pytest.raises(Infeasible):
        clime_column(s, 0, 0.0)
    with pytest.raises(ColumnErrors) as info:
        clime_full(s, ClimeConfig(0.0))
    assert set(info.value.failures) == {0, 1, 2}


def test_full_identity():
    est = clime_full(np.eye(6), ClimeConfig(0.2))
    assert np.max(np.abs(est.matrix - 0.8 * np.eye(6))) <= 1e-8
    assert np.all(est.column_feasibility <= 0.2 + 1e-8)


@given(st.integers(0, 100_000))
def test_min_magnitude_output_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, 6)
    est = clime_full(s, ClimeConfig(0.1))
    assert np.max(np.abs(est.matrix - est.matrix.T)) == 0.0
    # raw columns keep the column constraint
    assert np.max(np.abs(est.sigma @ est.columns - np.eye(6))) <= 0.1 + 1e-8


def test_symmetrize_min_magnitude_picks_smaller():
    t = np.array([[1.0, -0.5], [0.2, 1.0]])
    assert np.array_equal(symmetrize_min_magnitude(t), [[1.0, 0.2], [0.2, 1.0]])


def test_large_lambda_gives_zero():
    est = clime_full(np.eye(4) + 0.1, ClimeConfig(5.0))
    assert np.all(est.matrix == 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ClimeConfig(-0.1)
    with pytest.raises(ValueError):
        ClimeConfig(0.1, symmetrize_output="mean")
    with pytest.raises(ValueError):
        ClimeConfig(0.1, lp_tolerance=1e-2)


@pytest.fixture(scope="module")
def small_ds():
    return simulate(10, 300, 2, False, 0.1, seed=6)[3]


def test_cv_single_lambda(small_ds):
    res = cross_validate_lambda(small_ds, KernelSpec(0.4), [0.3], folds=3, grid=[0.3, 0.6])
    assert res.lambda_star == 0.3


def test_cv_duplicate_lambda_tie(small_ds):
    res = cross_validate_lambda(small_ds, KernelSpec(0.4), [0.3, 0.3], folds=3, grid=[0.3, 0.6])
    assert res.lambda_star == 0.3
    assert res.cv[0] == res.cv[1]
    assert res.best_index == 0


def test_cv_selects_within_grid(small_ds, tmp_path):
    h = choose_bandwidth(small_ds.n)
    rate = lambda_rate(small_ds.n, small_ds.d, h)
    consts = np.round(np.arange(0.5, 2.01, 0.1), 10)
    res = cross_validate_lambda(small_ds, KernelSpec(h), consts * rate, folds=5,
                                grid=default_grid(small_ds.z, 10), seed=1)
    assert res.lambda_star in res.lambdas
    assert np.all(np.isfinite(res.cv)) and np.all(res.sd >= 0)
    best = res.best_index
    assert res.cv[list(res.lambdas).index(res.lambda_star)] <= res.cv[best] + 2 * res.sd[best]
    write_cv_table(res, tmp_path / "cv.csv")
    table = np.loadtxt(tmp_path / "cv.csv", delimiter=",", skiprows=1)
    assert table.shape == (consts.size, 3)


def test_cv_fold_evaluation_points(small_ds):
    # grid=None evaluates at each held-out fold's own time points
    res = cross_validate_lambda(small_ds.subset(np.arange(60)), KernelSpec(0.5), [0.4, 0.8], folds=2)
    assert res.fold_sums.shape == (2, 2)
