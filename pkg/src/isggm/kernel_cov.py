"""Kernel-smoothed covariance estimators.

Three estimators share one weighting scheme ``K_h(Z_i - z) = K((Z_i - z)/h)/h``:

* inter-subject: ``sum w_i X_i Y_i^T / sum w_i`` (targets the shared signal
  covariance, the subject noise averages out across subjects),
* within-subject: ``sum w_i X_i X_i^T / sum w_i`` (baseline, biased by the
  subject's own noise covariance),
* U-statistic: inter-subject estimate averaged over all subject pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import NoSupport

KERNELS = ("epanechnikov",)


def epanechnikov(u):
    """``0.75 (1 - u^2)`` on ``|u| <= 1`` and zero elsewhere."""
    u = np.asarray(u, dtype=float)
    out = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelSpec:
    h: float
    family: str = "epanechnikov"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"bandwidth h={self.h} must be positive")
        if self.family not in KERNELS:
            raise ValueError(f"unknown kernel family '{self.family}'")

    def __call__(self, u):
        return epanechnikov(u)


@dataclass(frozen=True)
class SmoothedCovariance:
    z: float
    matrix: np.ndarray
    kernel_mass: float
    support_fraction: float
    h: float


def kernel_weights(z_obs, z, h):
    """Return ``(w, kernel_mass, support_fraction)`` at query time ``z``.

    ``kernel_mass`` is ``mean(w)``, the local effective-sample weight that
    multiplies the edge statistics downstream.
    """
    if not h > 0:
        raise ValueError(f"bandwidth h={h} must be positive")
    z_obs = np.asarray(z_obs, dtype=float)
    w = epanechnikov((z_obs - z) / h) / h
    w = np.atleast_1d(w)
    mass = float(w.mean())
    if not mass > 0:
        raise NoSupport(z, h)
    return w, mass, float(np.count_nonzero(w > 0) / w.size)


def _weighted_cross(w, a, b):
    idx = np.flatnonzero(w > 0)
    wi = w[idx]
    return (a[idx] * wi[:, None]).T @ b[idx] / wi.sum()


def smoothed_cov_inter(ds, z, kernel: KernelSpec) -> SmoothedCovariance:
    w, mass, frac = kernel_weights(ds.z, z, kernel.h)
    m = _weighted_cross(w, ds.x, ds.y)
    return SmoothedCovariance(float(z), m, mass, frac, kernel.h)


def smoothed_cov_within(obs, z_obs, z, kernel: KernelSpec) -> SmoothedCovariance:
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    w, mass, frac = kernel_weights(z_obs, z, kernel.h)
    m = _weighted_cross(w, obs, obs)
    return SmoothedCovariance(float(z), (m + m.T) / 2, mass, frac, kernel.h)


def smoothed_cov_ustat(mds, z, kernel: KernelSpec) -> SmoothedCovariance:
    """Average of the inter-subject estimate over all unordered subject pairs."""
    w, mass, frac = kernel_weights(mds.z, z, kernel.h)
    idx = np.flatnonzero(w > 0)
    wi = w[idx] / w[idx].sum()
    subs = [s[idx] for s in mds.subjects]
    acc = np.zeros((mds.d, mds.d))
    pairs = list(combinations(range(len(subs)), 2))
    for a, b in pairs:
        acc += (subs[a] * wi[:, None]).T @ subs[b]
    return SmoothedCovariance(float(z), acc / len(pairs), mass, frac, kernel.h)


def choose_bandwidth(n: int, c: float = 1.2) -> float:
    """``c * n^(-1/5)``."""
    if n < 2:
        raise ValueError(f"n={n} must be >= 2")
    if not c > 0:
        raise ValueError(f"c={c} must be positive")
    return c * n ** (-0.2)


def support_fractions(z_obs, grid, h):
    """Fraction of observations with positive weight at each grid point."""
    z_obs = np.asarray(z_obs, dtype=float)
    grid = np.asarray(grid, dtype=float)
    return np.mean(np.abs(z_obs[None, :] - grid[:, None]) < h, axis=1)


def check_support_rule(z_obs, grid, h, min_fraction=0.3):
    """Report the smallest support fraction over ``grid`` and whether it meets ``min_fraction``.

    Reports only; the bandwidth is never adjusted here.
    """
    worst = float(support_fractions(z_obs, grid, h).min())
    return worst, worst >= min_fraction


def default_grid(z_obs, size: int = 50):
    """``size`` evenly spaced points on ``[min Z, max Z]``."""
    if size < 2:
        raise ValueError("grid size must be >= 2")
    z_obs = np.asarray(z_obs, dtype=float)
    return np.linspace(z_obs.min(), z_obs.max(), size)


def lambda_rate(n, d, h):
    """The scale ``h^2 + sqrt(log(d/h) / (n h))`` used for the CLIME tuning parameter."""
    return h * h + np.sqrt(np.log(d / h) / (n * h))
