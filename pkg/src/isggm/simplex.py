"""Dense two-phase primal simplex for small inequality-form LPs.

Solves ``min c^T x  s.t.  A x <= b, x >= 0`` on a full tableau.  Rows with
negative right-hand side get an artificial variable and phase one drives
those to zero.  Pivoting uses Dantzig's rule and falls back to Bland's
smallest-index rule after a run of degenerate pivots, which rules out
cycling.  The Dantzig steps use a Harris ratio test with a pivot tolerance
relative to the entering column, so degenerate rows with tiny entries are
not chosen as pivots.  The final basic solution is recomputed from the original data by
a direct solve with the optimal basis so tableau round-off does not leak
into the returned point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SolverStall

OPTIMAL, STALLED, UNBOUNDED = 0, 1, 2
# consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERATE_RUN = 8
PIVOT_REL = 1e-9
FEAS_TOL = 1e-9


@njit(cache=True)
def _pivot(T, r, c):
    m1, w = T.shape
    p = T[r, c]
    for k in range(w):
        T[r, k] /= p
    for i in range(m1):
        if i == r:
            continue
        f = T[i, c]
        if f != 0.0:
            for k in range(w):
                T[i, k] -= f * T[r, k]


@njit(cache=True)
def _iterate(T, basis, n_cols, max_iter, tol, bland_only):
    """Run simplex iterations on tableau ``T``; objective is the last row."""
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    it = 0
    degenerate = 0
    while True:
        use_bland = bland_only or degenerate >= DEGENERATE_RUN
        enter = -1
        best = -tol
        for j in range(n_cols):
            dj = T[m, j]
            if dj < -tol:
                if use_bland:
                    enter = j
                    break
                if dj < best:
                    best = dj
                    enter = j
        if enter < 0:
            return OPTIMAL, it
        # pivots this small relative to the column are numerically unsafe
        colmax = 0.0
        for i in range(m):
            colmax = max(colmax, abs(T[i, enter]))
        ptol = max(tol, PIVOT_REL * colmax)
        leave = -1
        ratio = np.inf
        if use_bland:
            for i in range(m):
                a = T[i, enter]
                if a > ptol:
                    q = T[i, rhs] / a
                    if q < ratio - 1e-13 or (abs(q - ratio) <= 1e-13 and leave >= 0 and basis[i] < basis[leave]):
                        ratio = q
                        leave = i
        else:
            # Harris two-pass: bound the step with a small feasibility slack,
            # then take the largest pivot among rows within that bound
            bound = np.inf
            for i in range(m):
                a = T[i, enter]
                if a > ptol:
                    bound = min(bound, (max(T[i, rhs], 0.0) + FEAS_TOL) / a)
            big = 0.0
            for i in range(m):
                a = T[i, enter]
                if a > ptol and max(T[i, rhs], 0.0) / a <= bound and a > big:
                    big = a
                    leave = i
            if leave >= 0:
                ratio = max(T[leave, rhs], 0.0) / T[leave, enter]
        if leave < 0:
            return UNBOUNDED, it
        if ratio <= 1e-13:
            degenerate += 1
        else:
            degenerate = 0
        _pivot(T, leave, enter)
        basis[leave] = enter
        # Harris steps may leave tiny negative right-hand sides
        for i in range(m):
            if T[i, rhs] < 0.0 and T[i, rhs] > -FEAS_TOL:
                T[i, rhs] = 0.0
        it += 1
        if it >= max_iter:
            return STALLED, it


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    status: str
    iterations: int


def solve_lp(c, A, b, tol=1e-9, max_iter=None, bland_only=False) -> LPResult:
    """Minimize ``c @ x`` subject to ``A @ x <= b`` and ``x >= 0``.

    ``status`` is ``"optimal"``, ``"infeasible"`` or ``"unbounded"``.
    Exceeding ``max_iter`` pivots raises :class:`SolverStall`.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = max(1000, 50 * max(m, n) ** 2)

    flip = b < 0
    arts = np.flatnonzero(flip)
    na = arts.size
    ncol = n + m + na
    T = np.zeros((m + 1, ncol + 1))
    sign = np.where(flip, -1.0, 1.0)
    T[:m, :n] = A * sign[:, None]
    T[np.arange(m), n + np.arange(m)] = sign
    T[:m, -1] = b * sign
    basis = n + np.arange(m)
    for t, r in enumerate(arts):
        T[r, n + m + t] = 1.0
        basis[r] = n + m + t

    total = 0
    if na:
        # phase one: minimize the sum of artificials
        T[m, :] = -T[arts, :].sum(axis=0)
        T[m, n + m:ncol] = 0.0
        status, it = _iterate(T, basis, ncol, max_iter, tol, bland_only)
        total += it
        if status == STALLED:
            raise SolverStall(total, float(-T[m, -1]), "in phase one")
        if -T[m, -1] > max(tol, 1e-9) * max(1.0, np.abs(b).max()):
            return LPResult(np.full(n, np.nan), np.nan, "infeasible", total)
        # pivot remaining zero-level artificials out of the basis when possible
        for r in range(m):
            if basis[r] >= n + m:
                cols = np.flatnonzero(np.abs(T[r, : n + m]) > tol)
                if cols.size:
                    _pivot(T, r, cols[0])
                    basis[r] = cols[0]
        T[:m, n + m:ncol] = 0.0

    T[m, :] = 0.0
    T[m, :n] = c
    for r in range(m):
        j = basis[r]
        if j < n and c[j] != 0.0:
            T[m, :] -= c[j] * T[r, :]
    status, it = _iterate(T, basis, n + m, max_iter - total, tol, bland_only)
    total += it
    if status == STALLED:
        raise SolverStall(total, float(abs(T[m, -1])), "in phase two")
    if status == UNBOUNDED:
        return LPResult(np.full(n, np.nan), -np.inf, "unbounded", total)

    x = _refine(A, b, basis, n, m, T)
    return LPResult(x, float(c @ x), "optimal", total)


def _refine(A, b, basis, n, m, T):
    """Recompute the basic solution from the original data."""
    M = np.zeros((m, n + m))
    M[:, :n] = A
    M[np.arange(m), n + np.arange(m)] = 1.0
    keep = basis < n + m
    x = np.zeros(n)
    cols = basis[keep]
    try:
        if keep.all():
            y = np.linalg.solve(M[:, cols], b)
        else:
            # a redundant row kept its artificial; least squares on the rest
            y = np.linalg.lstsq(M[:, cols], b, rcond=None)[0]
    except np.linalg.LinAlgError:
        y = T[:m, -1][keep]
    y = np.where(np.abs(y) < 1e-14, 0.0, y)
    for val, j in zip(y, cols):
        if j < n:
            x[j] = max(val, 0.0)
    return x
