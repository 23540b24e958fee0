"""CLIME precision-matrix estimation and cross-validated lambda selection.

Each column solves the linear program

    min ||theta||_1   s.t.   ||Sigma_hat theta - e_j||_inf <= lambda

with ``theta = theta_plus - theta_minus`` split into nonnegative parts.
Columns are indexed from 0 throughout.
"""

from __future__ import annotations

import csv
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ColumnErrors, Infeasible, NoSupport, SolverStall
from .kernel_cov import KernelSpec, smoothed_cov_inter
from .seeding import rng_for
from .simplex import solve_lp

SYMMETRIZE_OUTPUT = ("none", "min_magnitude")


@dataclass(frozen=True)
class ClimeConfig:
    lam: float
    symmetrize_input: bool = True
    symmetrize_output: str = "min_magnitude"
    lp_tolerance: float = 1e-9

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda={self.lam} must be nonnegative")
        if self.symmetrize_output not in SYMMETRIZE_OUTPUT:
            raise ValueError(f"symmetrize_output must be one of {SYMMETRIZE_OUTPUT}")
        if not 0 < self.lp_tolerance <= 1e-4:
            raise ValueError("lp_tolerance must lie in (0, 1e-4]")

    def with_lambda(self, lam):
        return ClimeConfig(lam, self.symmetrize_input, self.symmetrize_output, self.lp_tolerance)


@dataclass
class PrecisionEstimate:
    matrix: np.ndarray
    column_feasibility: np.ndarray
    lam: float
    z: float | None = None
    sigma: np.ndarray | None = field(default=None, repr=False)
    # raw LP solutions, one per column, before output symmetrization
    columns: np.ndarray | None = field(default=None, repr=False)


def _column_lp(sigma_hat, j, lam):
    d = sigma_hat.shape[0]
    e = np.zeros(d)
    e[j] = 1.0
    A = np.block([[sigma_hat, -sigma_hat], [-sigma_hat, sigma_hat]])
    b = np.concatenate([lam + e, lam - e])
    return np.ones(2 * d), A, b


def clime_column(sigma_hat, j: int, lam: float, tol: float = 1e-9) -> np.ndarray:
    """One CLIME column; raises :class:`Infeasible` or :class:`SolverStall`."""
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    d = sigma_hat.shape[0]
    c, A, b = _column_lp(sigma_hat, j, lam)
    res = solve_lp(c, A, b, tol=tol, max_iter=max(1000, 50 * d * d))
    if res.status == "infeasible":
        raise Infeasible(j, lam)
    if res.status != "optimal":
        raise SolverStall(res.iterations, np.nan, f"status {res.status} on column {j}")
    return res.x[:d] - res.x[d:]


def symmetrize_min_magnitude(theta):
    """Keep, for each pair, whichever of ``theta[j,k]`` and ``theta[k,j]`` is smaller in magnitude."""
    t = np.asarray(theta, dtype=float)
    take = np.abs(t) <= np.abs(t.T)
    return np.where(take, t, t.T)


def clime_full(sigma_hat, config: ClimeConfig, z=None) -> PrecisionEstimate:
    s = np.asarray(sigma_hat, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("sigma_hat has non-finite entries")
    if config.symmetrize_input:
        s = (s + s.T) / 2
    d = s.shape[0]
    theta = np.zeros((d, d))
    failures = {}
    for j in range(d):
        try:
            theta[:, j] = clime_column(s, j, config.lam, config.lp_tolerance)
        except (Infeasible, SolverStall) as exc:
            failures[j] = exc
    if failures:
        raise ColumnErrors(failures)
    feas = np.max(np.abs(s @ theta - np.eye(d)), axis=0)
    cols = theta
    if config.symmetrize_output == "min_magnitude":
        theta = symmetrize_min_magnitude(theta)
    return PrecisionEstimate(theta, feas, config.lam, z, s, cols)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class CVResult:
    lambda_star: float
    lambdas: np.ndarray
    cv: np.ndarray
    sd: np.ndarray
    fold_sums: np.ndarray  # shape (n_lambda, L)
    best_index: int

    def table(self):
        return np.column_stack([self.lambdas, self.cv, self.sd])


def cross_validate_lambda(
    ds,
    kernel: KernelSpec,
    lambda_grid,
    folds: int = 5,
    grid=None,
    seed: int = 0,
    config: ClimeConfig | None = None,
) -> CVResult:
    """L-fold cross-validation with the minimum-plus-two-sd rule.

    For fold ``l`` the score is the sum over evaluation points of
    ``||Sigma_hat^(l)(z) Theta_hat^(-l)(z) - I||_max``, where the covariance
    uses only fold ``l`` and the precision uses the remaining folds.  The
    evaluation points are the fold's own time points when ``grid`` is None
    and the supplied grid otherwise.  The selected lambda is the smallest
    one whose mean score is within two fold-level standard deviations of
    the minimum.
    """
    lambdas = np.asarray(lambda_grid, dtype=float).ravel()
    if lambdas.size == 0:
        raise ValueError("empty lambda grid")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    config = config or ClimeConfig(lam=float(lambdas[0]))
    rng = rng_for(seed, "cv_folds", ds.n, folds)
    parts = np.array_split(rng.permutation(ds.n), folds)
    d = ds.d
    eye = np.eye(d)
    sums = np.zeros((lambdas.size, folds))

    for ell, test_idx in enumerate(parts):
        train_idx = np.setdiff1d(np.arange(ds.n), test_idx)
        test, train = ds.subset(np.sort(test_idx)), ds.subset(train_idx)
        points = test.z if grid is None else np.asarray(grid, dtype=float)
        for z in points:
            try:
                s_test = smoothed_cov_inter(test, z, kernel).matrix
                s_train = smoothed_cov_inter(train, z, kernel).matrix
            except NoSupport as exc:
                raise NoSupport(z, kernel.h, f"fold {ell + 1}") from exc
            if config.symmetrize_input:
                s_test = (s_test + s_test.T) / 2
            for a, lam in enumerate(lambdas):
                theta = clime_full(s_train, config.with_lambda(lam)).matrix
                sums[a, ell] += np.max(np.abs(s_test @ theta - eye))

    cv = sums.mean(axis=1)
    sd = sums.std(axis=1, ddof=1)
    best = int(np.argmin(cv))
    threshold = cv[best] + 2.0 * sd[best]
    ok = np.flatnonzero(cv <= threshold)
    # smallest lambda value; stable order keeps the first of equal entries
    pick = ok[np.argsort(lambdas[ok], kind="stable")[0]]
    return CVResult(float(lambdas[pick]), lambdas, cv, sd, sums, best)


def write_cv_table(result: CVResult, dest, delimiter=",") -> None:
    with open(dest, "w", newline="") if isinstance(dest, (str, Path)) else nullcontext(dest) as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["lambda", "cv", "sd"])
        for lam, cv, sd in result.table():
            w.writerow([repr(float(lam)), repr(float(cv)), repr(float(sd))])
