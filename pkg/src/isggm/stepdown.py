"""Topology tests on the estimated time-varying graph and the simulation studies.

``test_max_degree`` is the single-step hub test: one bootstrap quantile over
all pairs, reject edges whose statistic exceeds it, and compare the largest
per-time degree of the rejected graph with ``k``.  ``stepdown_test``
generalizes it to any monotone property by repeatedly testing only the
critical edges of the current rejected set.
"""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clime import ClimeConfig, clime_full, cross_validate_lambda
from .data_model import eval_covariance, simulate
from .debias_boot import (
    DebiasedField,
    EdgeSelector,
    bootstrap_draws,
    draw_multipliers,
    edge_statistics,
    estimate_field,
    quantile,
)
from .errors import StallError
from .graph_props import EdgeSet, GraphProperty, critical_set, eval_property
from .kernel_cov import (
    KernelSpec,
    choose_bandwidth,
    default_grid,
    lambda_rate,
    smoothed_cov_inter,
    smoothed_cov_within,
)
from .seeding import derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestConfig:
    """Settings for one test run.

    ``lam`` fixes lambda directly; otherwise ``lam_const * (h^2 + sqrt(log(d/h)/(nh)))``
    is used.  ``h`` likewise overrides ``h_const * n^(-1/5)``.
    """

    alpha: float = 0.05
    B: int = 500
    grid_size: int = 50
    h: float | None = None
    h_const: float = 1.2
    lam: float | None = None
    lam_const: float = 0.9
    seed: int = 0
    symmetrize_input: bool = True
    symmetrize_output: str = "min_magnitude"

    __test__ = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha={self.alpha} must lie in (0, 1)")
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be positive")
        if self.lam is not None and not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")

    def bandwidth(self, n):
        return self.h if self.h is not None else choose_bandwidth(n, self.h_const)

    def lambda_for(self, n, d):
        if self.lam is not None:
            return self.lam
        return float(self.lam_const * lambda_rate(n, d, self.bandwidth(n)))

    def clime_config(self, n, d):
        return ClimeConfig(self.lambda_for(n, d), self.symmetrize_input, self.symmetrize_output)


@dataclass
class TestOutcome:
    reject: bool
    rejected_edges: list
    d_rej: int
    quantile_trace: list
    iterations: int
    grid: np.ndarray = field(repr=False, default=None)
    statistic: float = float("nan")

    __test__ = False

    @property
    def psi(self) -> int:
        return int(self.reject)


def fit_field(ds, cfg: TestConfig, grid=None, within=False) -> DebiasedField:
    kernel = KernelSpec(cfg.bandwidth(ds.n))
    grid = default_grid(ds.z, cfg.grid_size) if grid is None else np.asarray(grid, dtype=float)
    return estimate_field(ds, grid, kernel, cfg.clime_config(ds.n, ds.d), within=within)


def _multipliers(ds, cfg):
    return draw_multipliers(cfg.B, ds.n, derive_seed(cfg.seed, "bootstrap"))


def test_max_degree(ds, k: int, cfg: TestConfig, fld: DebiasedField | None = None,
                    union_across_z: bool = False) -> TestOutcome:
    """Single-step test of ``max degree > k`` at some time point.

    With ``union_across_z`` the degree is taken on the union of rejected
    edges over the grid instead of per grid point.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    fld = fld if fld is not None else fit_field(ds, cfg)
    boot = bootstrap_draws(ds, fld, EdgeSelector.all_pairs(), xi=_multipliers(ds, cfg))
    c = quantile(boot, cfg.alpha)
    stats = edge_statistics(fld)
    off = ~np.eye(fld.d, dtype=bool)
    rej = (stats > c) & off
    if union_across_z:
        d_rej = int(rej.any(axis=0).sum(axis=1).max())
    else:
        d_rej = int(rej.sum(axis=2).max())
    edges = [EdgeSet.from_adjacency(r) for r in rej]
    return TestOutcome(
        reject=d_rej > k,
        rejected_edges=edges,
        d_rej=d_rej,
        quantile_trace=[(1, int(off.sum() // 2), c)],
        iterations=1,
        grid=fld.grid,
        statistic=float(np.max(np.where(off, stats, -np.inf))),
    )


test_max_degree.__test__ = False


def stepdown_test(ds, p: GraphProperty, cfg: TestConfig, fld: DebiasedField | None = None,
                  critical: str = "exact") -> TestOutcome:
    """Iterative skip-down test of a monotone property.

    ``critical="all_pairs"`` tests every pair at every iteration instead of
    the critical edges; that variant reproduces :func:`test_max_degree`.
    Multipliers are drawn once and shared by all iterations.
    """
    if critical not in ("exact", "all_pairs"):
        raise ValueError("critical must be 'exact' or 'all_pairs'")
    fld = fld if fld is not None else fit_field(ds, cfg)
    G, d = fld.grid.size, fld.d
    xi = _multipliers(ds, cfg)
    stats = edge_statistics(fld)
    current = [EdgeSet(d) for _ in range(G)]
    complete = EdgeSet.complete(d)
    trace = []
    cap = d * d
    psi = any(eval_property(p, e) for e in current)
    t = 0
    while not psi:
        t += 1
        if t > cap:
            raise StallError(f"step-down did not halt within {cap} iterations")
        crit = [complete if critical == "all_pairs" else critical_set(e, p) for e in current]
        size = sum(len(cs) for cs in crit)
        if size == 0:
            trace.append((t, 0, float("nan")))
            break
        boot = bootstrap_draws(ds, fld, EdgeSelector.per_time(crit), xi=xi)
        c = quantile(boot, cfg.alpha)
        trace.append((t, size, c))
        grown = False
        updated = []
        for g in range(G):
            new = [e for e in crit[g].edges if stats[g, e[0], e[1]] > c and e not in current[g]]
            if new:
                grown = True
                updated.append(current[g].union(new))
            else:
                updated.append(current[g])
        current = updated
        psi = any(eval_property(p, e) for e in current)
        if not grown:
            break
    d_rej = max((int(e.degrees().max()) for e in current), default=0)
    return TestOutcome(
        reject=bool(psi),
        rejected_edges=current,
        d_rej=d_rej,
        quantile_trace=trace,
        iterations=t,
        grid=fld.grid,
        statistic=float(np.max(np.where(~np.eye(d, dtype=bool), stats, -np.inf))),
    )


# ---------------------------------------------------------------------------
# support recovery metrics


def support_rates(theta_hat, truth, tol=1e-8):
    """True and false positive rates of the off-diagonal support."""
    est = np.abs(np.asarray(theta_hat)) > tol
    truth = np.asarray(truth, dtype=bool)
    iu = np.triu_indices(truth.shape[0], 1)
    e, t = est[iu] | est.T[iu], truth[iu]
    tpr = float(e[t].mean()) if t.any() else float("nan")
    fpr = float(e[~t].mean()) if (~t).any() else float("nan")
    return tpr, fpr


def auc(fpr, tpr):
    """Area under an ROC curve traced by (fpr, tpr) points, closed at (0,0) and (1,1)."""
    pts = sorted(zip(np.r_[0.0, fpr, 1.0], np.r_[0.0, tpr, 1.0]))
    x, y = np.array(pts).T
    return float(np.trapezoid(y, x))


def default_roc_lambdas():
    return np.r_[0.0, np.geomspace(1e-3, 10.0, 30)]


def roc_study(d=20, n=900, k_hub=3, lambda_grid=None, reps=20, seed=0, z_points=(0.25, 0.5, 0.75),
              nuisance_scale=1.0, h_const=1.2, pipelines=("inter", "within"), progress=None):
    """Average TPR/FPR of the estimated support per (pipeline, z, lambda).

    Returns a list of dict rows with keys ``method, z, lambda, tpr, fpr``.
    """
    lams = default_roc_lambdas() if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    acc = {}
    for r in range(reps):
        path, _, _, ds = simulate(d, n, k_hub, True, nuisance_scale, derive_seed(seed, "roc", r))
        kernel = KernelSpec(choose_bandwidth(n, h_const))
        for z in z_points:
            truth = path.support(z)
            for method in pipelines:
                if method == "inter":
                    s = smoothed_cov_inter(ds, z, kernel).matrix
                else:
                    s = smoothed_cov_within(ds.x, ds.z, z, kernel).matrix
                for lam in lams:
                    th = clime_full(s, ClimeConfig(float(lam))).matrix
                    tpr, fpr = support_rates(th, truth)
                    a = acc.setdefault((method, z, float(lam)), [0.0, 0.0])
                    a[0] += tpr
                    a[1] += fpr
        if progress:
            progress(r + 1, reps)
    return [
        {"method": m, "z": z, "lambda": lam, "tpr": v[0] / reps, "fpr": v[1] / reps}
        for (m, z, lam), v in acc.items()
    ]


def roc_auc(rows):
    """AUC per (method, z) from :func:`roc_study` rows."""
    out = {}
    keys = sorted({(r["method"], r["z"]) for r in rows})
    for key in keys:
        sel = [r for r in rows if (r["method"], r["z"]) == key]
        out[key] = auc([r["fpr"] for r in sel], [r["tpr"] for r in sel])
    return out


# ---------------------------------------------------------------------------
# calibration (type I error and power)


def pilot_lambda(d, k, n, cfg: TestConfig, nuisance_scale=0.1, consts=None, folds=5, seed=0):
    """Cross-validate the lambda constant on one pilot replication."""
    consts = np.round(np.arange(0.5, 2.01, 0.1), 10) if consts is None else np.asarray(consts)
    _, _, _, ds = simulate(d, n, k, False, nuisance_scale, derive_seed(seed, "pilot", n))
    h = cfg.bandwidth(n)
    rate = lambda_rate(n, d, h)
    grid = default_grid(ds.z, min(cfg.grid_size, 20))
    res = cross_validate_lambda(ds, KernelSpec(h), consts * rate, folds=folds, grid=grid,
                                seed=derive_seed(seed, "cv", n), config=cfg.clime_config(n, d))
    return res.lambda_star, res


def _calibration_job(job):
    d, k, n, r, alt, nuisance_scale, cfg, seed = job
    tag = "alt" if alt else "null"
    rep_seed = derive_seed(seed, tag, n, r)
    _, _, _, ds = simulate(d, n, k, alt, nuisance_scale, rep_seed)
    out = test_max_degree(ds, k, replace(cfg, seed=rep_seed))
    return {"key": f"{n}:{tag}:{r}", "n": n, "alt": alt, "rep": r, "reject": bool(out.reject), "d_rej": out.d_rej}


def run_jobs(fn, jobs, n_jobs=1, checkpoint=None, progress=None):
    """Run ``fn`` over ``jobs``; results keyed by ``result['key']`` are appended to ``checkpoint``."""
    done = {}
    if checkpoint is not None and Path(checkpoint).exists():
        for line in Path(checkpoint).read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                done[rec["key"]] = rec
    todo = [j for j in jobs if _job_key(j) not in done]
    fh = open(checkpoint, "a") if checkpoint is not None else None
    try:
        def record(res):
            done[res["key"]] = res
            if fh:
                fh.write(json.dumps(res) + "\n")
                fh.flush()
            if progress:
                progress(len(done), len(jobs))

        if n_jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as ex:
                for res in ex.map(fn, todo, chunksize=1):
                    record(res)
        else:
            for j in todo:
                record(fn(j))
    finally:
        if fh:
            fh.close()
    return [done[_job_key(j)] for j in jobs]


def _job_key(job):
    d, k, n, r, alt, *_ = job
    return f"{n}:{'alt' if alt else 'null'}:{r}"


def calibration_study(d, k, n_list, reps, cfg: TestConfig, nuisance_scale=0.1, seed=0, lambdas=None,
                      n_jobs=1, checkpoint=None, progress=None, which=("null", "alt")):
    """Rejection frequencies of the max-degree test under null and alternative data.

    Lambda is cross-validated once per ``n`` on a pilot replication and then
    frozen, unless ``lambdas`` (a dict n -> lambda) is given.
    Returns dict rows ``n, type_I, power, lambda``.
    """
    rows = []
    for n in n_list:
        if lambdas and n in lambdas:
            lam = lambdas[n]
        elif cfg.lam is not None:
            lam = cfg.lam
        else:
            lam, _ = pilot_lambda(d, k, n, cfg, nuisance_scale, seed=seed)
        run_cfg = replace(cfg, lam=lam)
        jobs = [(d, k, n, r, alt, nuisance_scale, run_cfg, seed)
                for alt in (False, True) if ("alt" if alt else "null") in which
                for r in range(reps)]
        res = run_jobs(_calibration_job, jobs, n_jobs, checkpoint, progress)
        null = [x["reject"] for x in res if not x["alt"]]
        alt = [x["reject"] for x in res if x["alt"]]
        rows.append({
            "n": n,
            "type_I": float(np.mean(null)) if null else float("nan"),
            "power": float(np.mean(alt)) if alt else float("nan"),
            "lambda": lam,
        })
    return rows


# ---------------------------------------------------------------------------
# estimation error


def sigma_error(ds, path, h, grid):
    """Largest max-norm error of the inter-subject covariance over ``grid``."""
    kernel = KernelSpec(h)
    return max(float(np.max(np.abs(smoothed_cov_inter(ds, z, kernel).matrix - eval_covariance(path, z))))
               for z in grid)


def rate_study(d=10, n_list=(400, 1600), reps=20, seed=0, h_const=1.2, grid_size=50, nuisance_scale=1.0, k_hub=2):
    """Mean sup-grid covariance error for each ``n``."""
    out = {}
    for n in n_list:
        errs = []
        for r in range(reps):
            path, _, _, ds = simulate(d, n, k_hub, True, nuisance_scale, derive_seed(seed, "rate", n, r))
            errs.append(sigma_error(ds, path, choose_bandwidth(n, h_const), default_grid(ds.z, grid_size)))
        out[n] = float(np.mean(errs))
    return out


def stderr_progress(label):
    def report(done, total):
        print(f"[{label}] {done}/{total}", file=sys.stderr, flush=True)

    return report
