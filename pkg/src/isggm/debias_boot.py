"""De-biased edge statistics and the Gaussian multiplier bootstrap.

For a grid of query times the pipeline stores the smoothed covariance, the
CLIME estimate and its one-step de-biased version

    theta_de[j, k] = theta[j, k] - theta_j^T (Sigma theta_k - e_k) / (theta_j^T Sigma_j).

The sup-max statistic scales ``|theta_de - theta_ref|`` by ``sqrt(n h)`` and
the kernel mass ``mean_i K_h(Z_i - z)``.  Its null distribution is
approximated by re-weighting the centered kernel summands with i.i.d.
standard normal multipliers that are shared across grid points and edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clime import ClimeConfig, clime_full
from .errors import DegenerateDenominator, EmptySelector
from .kernel_cov import KernelSpec, kernel_weights, smoothed_cov_inter, smoothed_cov_within
from .seeding import rng_for

DENOM_GUARD = 1e-6


def debias(theta_hat, sigma_hat, z=None, guard: float = DENOM_GUARD) -> np.ndarray:
    """One-step correction of a CLIME estimate; returns the full d x d matrix."""
    theta = np.asarray(getattr(theta_hat, "matrix", theta_hat), dtype=float)
    sigma = np.asarray(getattr(sigma_hat, "matrix", sigma_hat), dtype=float)
    d = theta.shape[0]
    denom = np.einsum("ij,ij->j", theta, sigma)
    bad = np.flatnonzero(np.abs(denom) < guard)
    if bad.size:
        raise DegenerateDenominator(z, int(bad[0]), float(denom[bad[0]]))
    num = theta.T @ (sigma @ theta - np.eye(d))
    return theta - num / denom[:, None]


@dataclass
class DebiasedField:
    """Everything the tests need on a time grid, computed once."""

    grid: np.ndarray
    theta_de: np.ndarray  # (G, d, d)
    kernel_mass: np.ndarray  # (G,)
    denom: np.ndarray  # (G, d)
    theta_hat: np.ndarray  # (G, d, d), raw CLIME columns used for de-biasing
    sigma_hat: np.ndarray  # (G, d, d), the matrix handed to CLIME
    n: int
    h: float
    lam: float
    symmetric: bool = True
    support_fraction: np.ndarray = field(default=None)
    theta_sym: np.ndarray = field(default=None)  # (G, d, d), symmetrized estimate

    @property
    def d(self) -> int:
        return self.theta_de.shape[1]

    @property
    def scale(self) -> float:
        return math.sqrt(self.n * self.h)


def estimate_field(ds, grid, kernel: KernelSpec, config: ClimeConfig, within: bool = False) -> DebiasedField:
    """Smoothed covariance, CLIME and de-biasing at each grid point.

    De-biasing uses the column-wise LP solutions: each satisfies
    ``(Sigma theta_j)_j >= 1 - lambda``, so the denominator stays away from
    zero.  Output symmetrization can destroy that when ``Sigma`` is indefinite.
    """
    grid = np.asarray(grid, dtype=float)
    G, d = grid.size, ds.d
    theta_de = np.empty((G, d, d))
    theta_hat = np.empty((G, d, d))
    theta_sym = np.empty((G, d, d))
    sigma = np.empty((G, d, d))
    denom = np.empty((G, d))
    mass = np.empty(G)
    frac = np.empty(G)
    for g, z in enumerate(grid):
        if within:
            sc = smoothed_cov_within(ds.x, ds.z, z, kernel)
        else:
            sc = smoothed_cov_inter(ds, z, kernel)
        est = clime_full(sc.matrix, config, z=z)
        theta_hat[g] = est.columns
        theta_sym[g] = est.matrix
        sigma[g] = est.sigma
        theta_de[g] = debias(est.columns, est.sigma, z=z)
        denom[g] = np.einsum("ij,ij->j", est.columns, est.sigma)
        mass[g] = sc.kernel_mass
        frac[g] = sc.support_fraction
    return DebiasedField(grid, theta_de, mass, denom, theta_hat, sigma, ds.n, kernel.h,
                         config.lam, config.symmetrize_input, frac, theta_sym)


# ---------------------------------------------------------------------------
# edge selectors


class EdgeSelector:
    """Edges over which the max is taken, either all pairs or one set per grid point.

    Edges are unordered; an edge ``{j, k}`` contributes both ordered entries
    ``(j, k)`` and ``(k, j)`` of the (non-symmetric) de-biased matrix.
    """

    def __init__(self, mode="all_pairs", sets=None, d=None, size=None):
        if mode not in ("all_pairs", "per_time_sets"):
            raise ValueError(f"unknown selector mode '{mode}'")
        self.mode = mode
        self.sets = sets
        if mode == "per_time_sets":
            if sets is None:
                raise ValueError("per_time_sets needs a list of edge sets")
        self._d = d
        self._size = size

    @classmethod
    def all_pairs(cls):
        return cls("all_pairs")

    @classmethod
    def per_time(cls, sets):
        return cls("per_time_sets", list(sets))

    def masks(self, d, G):
        """Boolean ``(G, d, d)`` symmetric masks with empty diagonal."""
        if self.mode == "all_pairs":
            m = ~np.eye(d, dtype=bool)
            return np.broadcast_to(m, (G, d, d))
        if len(self.sets) != G:
            raise ValueError(f"selector has {len(self.sets)} sets for a grid of {G} points")
        out = np.zeros((G, d, d), dtype=bool)
        for g, es in enumerate(self.sets):
            out[g] = _as_mask(es, d)
        return out


def _as_mask(es, d):
    if hasattr(es, "adjacency"):
        return es.adjacency()
    m = np.zeros((d, d), dtype=bool)
    arr = np.asarray(es, dtype=bool) if np.ndim(es) == 2 and np.shape(es) == (d, d) else None
    if arr is not None:
        m = arr | arr.T
    else:
        for j, k in es:
            if j != k:
                m[j, k] = m[k, j] = True
    np.fill_diagonal(m, False)
    return m


def edge_statistics(fld: DebiasedField, theta_ref=None) -> np.ndarray:
    """Per-grid ``sqrt(nh) |theta_de - theta_ref| * kernel_mass``, symmetrized by max."""
    diff = fld.theta_de if theta_ref is None else fld.theta_de - np.asarray(theta_ref)
    s = fld.scale * np.abs(diff) * fld.kernel_mass[:, None, None]
    return np.maximum(s, np.swapaxes(s, 1, 2))


def test_statistic(fld: DebiasedField, selector: EdgeSelector | None = None, theta_ref=None) -> float:
    """Grid maximum of the edge statistics over the selected edges."""
    selector = selector or EdgeSelector.all_pairs()
    G, d = fld.grid.size, fld.d
    masks = selector.masks(d, G)
    if not masks.any():
        raise EmptySelector("edge selector is empty at every grid point")
    stats = edge_statistics(fld, theta_ref)
    return float(np.max(np.where(masks, stats, -np.inf)))


test_statistic.__test__ = False  # not a pytest test


# ---------------------------------------------------------------------------
# bootstrap


@dataclass
class BootstrapResult:
    samples: np.ndarray
    B: int
    seed: int | None
    quantile_cache: dict = field(default_factory=dict)

    def quantile(self, alpha):
        if alpha not in self.quantile_cache:
            self.quantile_cache[alpha] = quantile(self, alpha)
        return self.quantile_cache[alpha]


def draw_multipliers(B, n, seed):
    """Standard normal multipliers, b outer and i inner."""
    return rng_for(seed, "multipliers", B, n).standard_normal((B, n))


def bootstrap_draws(
    ds,
    fld: DebiasedField,
    selector: EdgeSelector | None = None,
    B: int = 500,
    seed: int = 0,
    xi=None,
) -> BootstrapResult:
    """``B`` draws of the multiplier-bootstrap sup-max statistic.

    ``xi`` overrides the ``(B, n)`` multiplier matrix; the pipeline uses it
    to share multipliers between iterations and tests use it as a hook.
    """
    if xi is None:
        if B < 1:
            raise ValueError("B must be >= 1")
        xi = draw_multipliers(B, ds.n, seed)
    xi = np.asarray(xi, dtype=float)
    B = xi.shape[0]
    selector = selector or EdgeSelector.all_pairs()
    G, d = fld.grid.size, fld.d
    masks = selector.masks(d, G)
    if not masks.any():
        raise EmptySelector("edge selector is empty at every grid point")
    bad = np.argwhere(np.abs(fld.denom) < DENOM_GUARD)
    if bad.size:
        g, j = bad[0]
        raise DegenerateDenominator(fld.grid[g], int(j), float(fld.denom[g, j]))

    out = np.zeros(B)
    factor = fld.scale / ds.n
    for g, z in enumerate(fld.grid):
        jj, kk = np.nonzero(masks[g])
        if jj.size == 0:
            continue
        w, _, _ = kernel_weights(ds.z, z, fld.h)
        idx = np.flatnonzero(w > 0)
        th = fld.theta_hat[g]
        a = ds.x[idx] @ th
        b = ds.y[idx] @ th
        if fld.symmetric:
            u = 0.5 * (a[:, jj] * b[:, kk] + b[:, jj] * a[:, kk])
        else:
            u = a[:, jj] * b[:, kk]
        c = xi[:, idx] * w[idx]
        vals = c @ u - np.outer(c.sum(axis=1), th[kk, jj])
        vals = np.abs(vals) * (factor / fld.denom[g, jj])
        np.maximum(out, vals.max(axis=1), out=out)
    return BootstrapResult(out, B, seed)


def quantile(result: BootstrapResult, alpha: float) -> float:
    """The ``ceil((1 - alpha) B)``-th smallest draw."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha={alpha} must lie in (0, 1)")
    s = np.sort(np.asarray(result.samples))
    rank = math.ceil(round((1.0 - alpha) * s.size, 9))
    return float(s[max(rank, 1) - 1])


def write_samples(result: BootstrapResult, dest) -> None:
    np.savetxt(dest, result.samples, fmt="%.17g", header="t_boot", comments="")
