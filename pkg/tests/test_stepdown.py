import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isggm.data_model import constant_path, generate_nuisance, sample_dataset, simulate
from isggm.debias_boot import DebiasedField
from isggm.graph_props import GraphProperty, eval_property
from isggm.seeding import derive_seed, rng_for
from isggm.stepdown import (
    TestConfig,
    auc,
    calibration_study,
    fit_field,
    rate_study,
    roc_auc,
    roc_study,
    run_jobs,
    stepdown_test,
    support_rates,
    test_max_degree,
)

CFG = TestConfig(B=150, grid_size=8)


@pytest.fixture(scope="module")
def alt_data():
    ds = simulate(12, 800, 2, True, 0.1, seed=21)[3]
    return ds, fit_field(ds, CFG)


def _zero_field(fld):
    z = np.zeros_like(fld.theta_de)
    return DebiasedField(fld.grid, z, fld.kernel_mass, fld.denom, fld.theta_hat, fld.sigma_hat,
                         fld.n, fld.h, fld.lam, fld.symmetric, fld.support_fraction, fld.theta_sym)


def test_seed_derivation_is_stable():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)
    assert rng_for(5, "x").random() == rng_for(5, "x").random()


def test_zero_statistics_accept(alt_data):
    ds, fld = alt_data
    zf = _zero_field(fld)
    for k in (0, 1, 5):
        out = test_max_degree(ds, k, CFG, zf)
        assert out.d_rej == 0 and not out.reject
    out = stepdown_test(ds, GraphProperty("connected"), CFG, zf)
    assert not out.reject


def test_max_degree_deterministic(alt_data):
    ds, _ = alt_data
    a = test_max_degree(ds, 2, CFG)
    b = test_max_degree(ds, 2, CFG)
    assert a.reject == b.reject and a.d_rej == b.d_rej
    assert a.quantile_trace == b.quantile_trace


def test_union_across_z_is_at_least_per_time(alt_data):
    ds, fld = alt_data
    per = test_max_degree(ds, 2, CFG, fld)
    uni = test_max_degree(ds, 2, CFG, fld, union_across_z=True)
    assert uni.d_rej >= per.d_rej


@pytest.mark.parametrize("k", [0, 1, 2, 3, 5])
def test_all_pairs_stepdown_agrees_with_single_step(alt_data, k):
    ds, fld = alt_data
    one = test_max_degree(ds, k, CFG, fld)
    two = stepdown_test(ds, GraphProperty("max_degree_greater", k), CFG, fld, critical="all_pairs")
    assert one.reject == two.reject


def test_raising_alpha_never_unrejects(alt_data):
    ds, fld = alt_data
    for k in (1, 2, 3):
        prev = None
        for alpha in (0.01, 0.05, 0.1, 0.2):
            out = test_max_degree(ds, k, replace(CFG, alpha=alpha), fld)
            if prev is not None:
                assert out.reject >= prev.reject
                assert all(set(a.edges) <= set(b.edges) for a, b in zip(prev.rejected_edges, out.rejected_edges))
            prev = out


PROPS = [GraphProperty("connected"), GraphProperty("components_at_most", 3),
         GraphProperty("max_degree_greater", 2), GraphProperty("isolated_at_most", 4),
         GraphProperty("clique_greater", 2)]


@pytest.mark.parametrize("p", PROPS, ids=str)
def test_stepdown_halts_with_consistent_outcome(alt_data, p):
    ds, fld = alt_data
    out = stepdown_test(ds, p, CFG, fld)
    d = fld.d
    assert out.iterations <= d * (d - 1) // 2
    assert out.reject == any(eval_property(p, e) for e in out.rejected_edges)
    sizes = [t[1] for t in out.quantile_trace]
    assert all(s >= 0 for s in sizes)


def test_stepdown_sets_grow(alt_data, monkeypatch):
    import isggm.stepdown as sd

    ds, fld = alt_data
    seen = []
    real = sd.critical_set

    def spy(es, p):
        seen.append(es)
        return real(es, p)

    monkeypatch.setattr(sd, "critical_set", spy)
    stepdown_test(ds, GraphProperty("components_at_most", 1), CFG, fld)
    G = fld.grid.size
    rounds = [seen[i:i + G] for i in range(0, len(seen), G)]
    for a, b in zip(rounds, rounds[1:]):
        assert all(set(x.edges) <= set(y.edges) for x, y in zip(a, b))


def test_already_true_property_halts_immediately(alt_data):
    ds, fld = alt_data
    out = stepdown_test(ds, GraphProperty("isolated_at_most", fld.d), CFG, fld)
    assert out.reject and out.iterations == 0


def test_empty_critical_sets_halt_in_one_iteration(alt_data):
    ds, fld = alt_data
    # components <= 0 can never hold, so nothing is ever critical
    out = stepdown_test(ds, GraphProperty("components_at_most", 0), CFG, fld)
    assert not out.reject and out.iterations == 1 and out.quantile_trace[0][1] == 0


def test_connected_power_on_strong_tree():
    d = 8
    off = np.zeros((d, d))
    for i in range(1, d):
        off[i - 1, i] = off[i, i - 1] = 0.4
    path = constant_path(off)
    lx, ly = generate_nuisance(d, 1), generate_nuisance(d, 2)
    reps, hits = 100, 0
    for r in range(reps):
        ds = sample_dataset(path, lx, ly, 800, 0.1, derive_seed(5, r))
        hits += stepdown_test(ds, GraphProperty("connected"), TestConfig(B=200, grid_size=10, seed=r)).reject
    assert hits / reps >= 0.9


def test_support_rates_and_auc():
    truth = np.zeros((4, 4), dtype=bool)
    truth[0, 1] = truth[1, 0] = True
    est = np.eye(4)
    assert support_rates(est, truth) == (0.0, 0.0)
    assert support_rates(np.ones((4, 4)), truth) == (1.0, 1.0)
    assert auc([0.0, 0.2, 1.0], [0.0, 0.9, 1.0]) == pytest.approx(0.5 * 0.2 * 0.9 + 0.8 * 0.95)
    assert auc([], []) == pytest.approx(0.5)


def test_roc_extremes():
    rows = roc_study(d=10, n=400, k_hub=2, lambda_grid=[0.0, 50.0], reps=2, z_points=(0.5,))
    big = [r for r in rows if r["lambda"] == 50.0]
    assert all(r["tpr"] == 0 and r["fpr"] == 0 for r in big)
    dense = [r for r in rows if r["lambda"] == 0.0]
    assert all(r["fpr"] > 0.95 for r in dense)
    assert all(0 <= r["tpr"] <= 1 and 0 <= r["fpr"] <= 1 for r in rows)
    assert set(roc_auc(rows)) == {("inter", 0.5), ("within", 0.5)}


def test_calibration_shape_and_checkpoint(tmp_path):
    cfg = TestConfig(B=60, grid_size=5)
    ck = tmp_path / "ck.jsonl"
    rows = calibration_study(10, 2, [300, 500], 2, cfg, lambdas={300: 0.3, 500: 0.25}, checkpoint=ck)
    assert [r["n"] for r in rows] == [300, 500]
    assert all(0 <= r["type_I"] <= 1 and 0 <= r["power"] <= 1 for r in rows)
    lines = ck.read_text().splitlines()
    assert len(lines) == 8
    # a resumed run replays the checkpoint without recomputing
    again = calibration_study(10, 2, [300, 500], 2, cfg, lambdas={300: 0.3, 500: 0.25}, checkpoint=ck)
    assert again == rows
    assert len(ck.read_text().splitlines()) == 8


def test_run_jobs_resumes_partial(tmp_path):
    ck = tmp_path / "ck.jsonl"
    calls = []

    def fn(job):
        calls.append(job)
        return {"key": f"{job[2]}:{'alt' if job[4] else 'null'}:{job[3]}", "v": job[3] ** 2}

    jobs = [(5, 1, 100, r, False) for r in range(4)]
    ck.write_text(json.dumps({"key": "100:null:1", "v": 1}) + "\n")
    out = run_jobs(fn, jobs, checkpoint=ck)
    assert [o["v"] for o in out] == [0, 1, 4, 9]
    assert [c[3] for c in calls] == [0, 2, 3]


def test_rate_study_shape():
    out = rate_study(d=8, n_list=(200, 800), reps=2, grid_size=5)
    assert set(out) == {200, 800} and all(v > 0 for v in out.values())


def test_config_validation():
    with pytest.raises(ValueError):
        TestConfig(alpha=1.0)
    with pytest.raises(ValueError):
        TestConfig(B=0)
    assert TestConfig(lam=0.3).lambda_for(100, 10) == 0.3
    assert TestConfig(h=0.2).bandwidth(100) == 0.2


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_stepdown_iterations_bounded(seed):
    ds = simulate(8, 300, 1, seed % 2 == 0, 0.1, seed=seed)[3]
    cfg = TestConfig(B=60, grid_size=4, seed=seed)
    fld = fit_field(ds, cfg)
    for p in (GraphProperty("connected"), GraphProperty("clique_greater", 2)):
        out = stepdown_test(ds, p, cfg, fld)
        assert out.iterations <= 8 * 7 // 2
