"""Datasets, synthetic precision paths and the two-subject data generator.

The generator follows the shared-signal model

    X(z) = S(z) + E_X,    Y(z) = S(z) + E_Y,    S(z) ~ N(0, Theta(z)^{-1}),

where both subjects share the time points and the signal draw, and the
subject-specific noise E_X, E_Y is independent across subjects.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConstructionError, DataError
from .seeding import derive_seed, rng_for

EDGE_VALUE = 0.3
ANCHOR_Z = (0.0, 0.2, 0.5)


@dataclass(frozen=True)
class PairedDataset:
    """``n`` triplets ``(z_i, x_i, y_i)`` from two subjects on a shared clock."""

    z: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel()
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if x.shape != y.shape:
            raise DataError(f"x has shape {x.shape} but y has shape {y.shape}")
        if x.shape[0] != z.shape[0]:
            raise DataError(f"{z.shape[0]} time points but {x.shape[0]} observations")
        if z.shape[0] < 1:
            raise DataError("dataset is empty")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite entries")
        if np.any(z < 0.0) or np.any(z > 1.0):
            raise DataError("time indices must lie in [0, 1]")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def swapped(self) -> "PairedDataset":
        return PairedDataset(self.z, self.y, self.x)

    def subset(self, idx) -> "PairedDataset":
        return PairedDataset(self.z[idx], self.x[idx], self.y[idx])


@dataclass(frozen=True)
class MultiSubjectDataset:
    z: np.ndarray
    subjects: tuple

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel()
        subs = tuple(np.atleast_2d(np.asarray(s, dtype=float)) for s in self.subjects)
        if len(subs) < 2:
            raise DataError("need at least two subjects")
        shape = subs[0].shape
        for i, s in enumerate(subs):
            if s.shape != shape:
                raise DataError(f"subject {i + 1} has shape {s.shape}, expected {shape}")
            if not np.all(np.isfinite(s)):
                raise DataError(f"subject {i + 1} contains non-finite entries")
        if shape[0] != z.shape[0]:
            raise DataError(f"{z.shape[0]} time points but {shape[0]} observations")
        if np.any(z < 0.0) or np.any(z > 1.0):
            raise DataError("time indices must lie in [0, 1]")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "subjects", subs)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.subjects[0].shape[1]

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    def group_average(self, groups) -> PairedDataset:
        """Average subjects within two groups, giving a paired dataset."""
        ga, gb = groups
        x = np.mean([self.subjects[i] for i in ga], axis=0)
        y = np.mean([self.subjects[i] for i in gb], axis=0)
        return PairedDataset(self.z, x, y)


# ---------------------------------------------------------------------------
# ground-truth precision path


@dataclass(frozen=True)
class PrecisionPath:
    """Piecewise-linear path of off-diagonal precision entries.

    ``anchors`` holds ``(z, offdiag)`` pairs; each ``offdiag`` is symmetric
    with a zero diagonal.  The positive-definiteness fix is applied when
    the path is evaluated, see :func:`eval_precision`.
    """

    anchors: tuple
    d: int
    k_hub: int
    alternative: bool = True
    hubs: tuple = ()

    def __post_init__(self):
        zs = [a[0] for a in self.anchors]
        if any(b <= a for a, b in zip(zs, zs[1:])):
            raise ConstructionError("anchor z values must be strictly increasing")
        if zs[0] < 0 or zs[-1] > 1:
            raise ConstructionError("anchor z values must lie in [0, 1]")

    @property
    def anchor_z(self):
        return np.array([a[0] for a in self.anchors])

    def support(self, z, tol=1e-12):
        """Boolean adjacency (zero diagonal) of the true graph at ``z``."""
        return np.abs(raw_precision(self, z)) > tol

    def true_edges(self, z):
        from .graph_props import EdgeSet

        return EdgeSet.from_adjacency(self.support(z))


def _degrees(adj):
    return adj.sum(axis=1)


def _place_random_edges(rng, adj, m, cap):
    """Turn on ``m`` random off-diagonal pairs, never exceeding degree ``cap``."""
    d = adj.shape[0]
    iu, ju = np.triu_indices(d, 1)
    order = rng.permutation(iu.size)
    deg = _degrees(adj)
    placed = 0
    for t in order:
        if placed == m:
            break
        a, b = iu[t], ju[t]
        if adj[a, b] or deg[a] >= cap or deg[b] >= cap:
            continue
        adj[a, b] = adj[b, a] = True
        deg[a] += 1
        deg[b] += 1
        placed += 1
    if placed < m:
        raise ConstructionError(
            f"could only place {placed} of {m} edges with degree cap k_hub={cap} at d={d}"
        )


def generate_precision_path(d: int, k_hub: int, alternative: bool = True, seed: int = 0) -> PrecisionPath:
    """Build the three-anchor path at z = 0, 0.2, 0.5.

    ``floor((d-2)/4)`` random edges at 0.3 form Theta(0) and as many again
    are added for Theta(0.2), both keeping every degree at most ``k_hub``.
    At z = 0.5 two random nodes become hubs: under the alternative each
    receives ``k_hub + 1`` new edges, under the null each is filled up to
    degree ``k_hub`` using partners whose degree is still below ``k_hub``.
    """
    d = int(d)
    k_hub = int(k_hub)
    if d < 8:
        raise ConstructionError(f"d={d} is too small: need d >= 8")
    if k_hub < 1:
        raise ConstructionError(f"k_hub={k_hub} must be >= 1")
    if alternative and d < 2 * k_hub + 2:
        raise ConstructionError(
            f"d={d} cannot host hubs of degree k_hub+1={k_hub + 1}: need d >= 2*k_hub+2"
        )
    rng = rng_for(seed, "precision_path", d, k_hub, bool(alternative))
    m = (d - 2) // 4

    adj0 = np.zeros((d, d), dtype=bool)
    _place_random_edges(rng, adj0, m, k_hub)
    adj1 = adj0.copy()
    _place_random_edges(rng, adj1, m, k_hub)
    adj2 = adj1.copy()

    hubs = tuple(int(c) for c in rng.choice(d, size=2, replace=False))
    for c in hubs:
        if alternative:
            cand = [w for w in rng.permutation(d) if w != c and not adj2[c, w]]
            if len(cand) < k_hub + 1:
                raise ConstructionError(
                    f"node {c + 1} has only {len(cand)} free partners, need k_hub+1={k_hub + 1}"
                )
            for w in cand[: k_hub + 1]:
                adj2[c, w] = adj2[w, c] = True
        else:
            deg = _degrees(adj2)
            for w in rng.permutation(d):
                if deg[c] >= k_hub:
                    break
                if w == c or adj2[c, w] or deg[w] >= k_hub:
                    continue
                adj2[c, w] = adj2[w, c] = True
                deg[c] += 1
                deg[w] += 1

    anchors = tuple((z, EDGE_VALUE * a.astype(float)) for z, a in zip(ANCHOR_Z, (adj0, adj1, adj2)))
    return PrecisionPath(anchors=anchors, d=d, k_hub=k_hub, alternative=bool(alternative), hubs=hubs)


def constant_path(theta_offdiag) -> PrecisionPath:
    """A path whose off-diagonal pattern does not change with z."""
    t = np.array(theta_offdiag, dtype=float)
    np.fill_diagonal(t, 0.0)
    t = (t + t.T) / 2
    return PrecisionPath(anchors=((0.0, t),), d=t.shape[0], k_hub=0)


def raw_precision(path: PrecisionPath, z: float) -> np.ndarray:
    """Linearly interpolated off-diagonals (zero diagonal), before the PD fix."""
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z={z} outside [0, 1]")
    zs = path.anchor_z
    if z <= zs[0]:
        return path.anchors[0][1].copy()
    if z >= zs[-1]:
        # held constant past the last anchor
        return path.anchors[-1][1].copy()
    i = int(np.searchsorted(zs, z, side="right")) - 1
    z0, t0 = path.anchors[i]
    z1, t1 = path.anchors[i + 1]
    w = (z - z0) / (z1 - z0)
    return (1.0 - w) * t0 + w * t1


def pd_fix(offdiag: np.ndarray) -> np.ndarray:
    """Set the diagonal to |lambda_min| + 0.1 and rescale to unit diagonal.

    ``lambda_min`` is taken over the zero-diagonal matrix, so the fixed
    matrix has smallest eigenvalue 0.1 before rescaling.
    """
    t = np.array(offdiag, dtype=float)
    np.fill_diagonal(t, 0.0)
    diag = abs(min_eigenvalue(t)) + 0.1
    t /= diag
    np.fill_diagonal(t, 1.0)
    return t


def eval_precision(path: PrecisionPath, z: float) -> np.ndarray:
    return pd_fix(raw_precision(path, z))


def eval_covariance(path: PrecisionPath, z: float) -> np.ndarray:
    s = np.linalg.inv(eval_precision(path, z))
    return (s + s.T) / 2


# ---------------------------------------------------------------------------
# nuisance covariance and sampling


@dataclass(frozen=True)
class NuisanceCovariance:
    matrix: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DataError("nuisance covariance must be square")
        if np.max(np.abs(m - m.T), initial=0.0) > 1e-10:
            raise DataError("nuisance covariance must be symmetric")
        if m.size and min_eigenvalue(m) < -1e-8:
            raise DataError("nuisance covariance must be positive semidefinite")
        if self.scale < 0:
            raise DataError("nuisance scale must be nonnegative")
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def generate_nuisance(d: int, seed: int = 0, n_perturb: int = 10, perturb_scale: float = 1.0) -> NuisanceCovariance:
    """Unit diagonal, 0.3 off-diagonal, plus ``n_perturb`` rank-one terms eps eps^T."""
    base = np.full((d, d), 0.3)
    np.fill_diagonal(base, 1.0)
    rng = rng_for(seed, "nuisance", d)
    eps = rng.standard_normal((n_perturb, d))
    m = base + perturb_scale * (eps.T @ eps)
    return NuisanceCovariance((m + m.T) / 2)


def _mvn_factor(cov: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L @ L.T == cov``; eigen fallback clips negatives."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh((cov + cov.T) / 2)
        if w.min() < -1e-10 * max(1.0, abs(w).max()):
            raise DataError(f"covariance has negative eigenvalue {w.min():.3g}")
        return v * np.sqrt(np.clip(w, 0.0, None))


def _signal_factor(path, z):
    theta = eval_precision(path, z)
    try:
        sigma = np.linalg.inv(theta)
    except np.linalg.LinAlgError as exc:
        raise DataError(f"Sigma(z={z:.4f}) is not invertible") from exc
    return _mvn_factor((sigma + sigma.T) / 2)


def sample_dataset(
    path: PrecisionPath,
    lx: NuisanceCovariance,
    ly: NuisanceCovariance,
    n: int,
    nuisance_scale: float = 1.0,
    seed: int = 0,
) -> PairedDataset:
    if n < 2:
        raise DataError(f"n={n} must be >= 2")
    if nuisance_scale < 0:
        raise DataError("nuisance_scale must be nonnegative")
    d = path.d
    rng = rng_for(seed, "sample", n, d)
    z = rng.uniform(0.0, 1.0, size=n)
    gs = rng.standard_normal((n, d))
    gx = rng.standard_normal((n, d))
    gy = rng.standard_normal((n, d))

    s = np.empty((n, d))
    z_last = float(path.anchor_z[-1])
    f_last = None
    for i, zi in enumerate(z):
        if zi >= z_last:
            # Theta is constant past the last anchor
            if f_last is None:
                f_last = _signal_factor(path, z_last)
            f = f_last
        else:
            f = _signal_factor(path, zi)
        s[i] = f @ gs[i]

    fx = _mvn_factor(nuisance_scale * lx.scale * lx.matrix)
    fy = _mvn_factor(nuisance_scale * ly.scale * ly.matrix)
    x = s + gx @ fx.T
    y = s + gy @ fy.T
    return PairedDataset(z, x, y)


def simulate(d, n, k_hub, alternative=True, nuisance_scale=1.0, seed=0):
    """Path, nuisance pair and dataset, all derived from one seed."""
    path = generate_precision_path(d, k_hub, alternative, seed)
    lx = generate_nuisance(d, seed=derive_seed(seed, "lx"))
    ly = generate_nuisance(d, seed=derive_seed(seed, "ly"))
    ds = sample_dataset(path, lx, ly, n, nuisance_scale, seed)
    return path, lx, ly, ds


# ---------------------------------------------------------------------------
# linear algebra helpers


def min_eigenvalue(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("min_eigenvalue needs a square matrix")
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-8:
        raise ValueError("min_eigenvalue needs a symmetric matrix")
    return float(np.linalg.eigvalsh((m + m.T) / 2)[0])


# ---------------------------------------------------------------------------
# standardization and file I/O


def _standardize_block(a, prefix):
    mu = a.mean(axis=0)
    sd = a.std(axis=0, ddof=1) if a.shape[0] > 1 else np.zeros(a.shape[1])
    bad = np.flatnonzero(~(sd > 0))
    if bad.size:
        raise DataError(f"column {prefix}{bad[0] + 1} has zero variance")
    return (a - mu) / sd


def standardize(ds):
    """Center each column and scale it to unit sample sd (n-1 denominator)."""
    if isinstance(ds, PairedDataset):
        return PairedDataset(ds.z, _standardize_block(ds.x, "x"), _standardize_block(ds.y, "y"))
    if isinstance(ds, MultiSubjectDataset):
        subs = [_standardize_block(s, f"s{i + 1}_") for i, s in enumerate(ds.subjects)]
        return MultiSubjectDataset(ds.z, tuple(subs))
    raise TypeError(f"cannot standardize {type(ds).__name__}")


_PAIRED = re.compile(r"^([xy])(\d+)$")
_MULTI = re.compile(r"^s(\d+)_(\d+)$")


def _sniff_delimiter(first_line):
    return "\t" if "\t" in first_line else ","


def _parse_layout(header, layout):
    names = [h.strip() for h in header[1:]]
    if layout == "auto":
        layout = "multi" if names and all(_MULTI.match(h) for h in names) else "paired"
    if layout == "paired":
        pos = {}
        for c, h in enumerate(names, start=1):
            m = _PAIRED.match(h)
            if not m:
                raise DataError(f"header column {c + 1} '{h}' is not of the form x<j> or y<j>")
            pos[(m.group(1), int(m.group(2)))] = c
        d = sum(1 for k in pos if k[0] == "x")
        want = {(s, j) for s in "xy" for j in range(1, d + 1)}
        if set(pos) != want or d == 0:
            raise DataError(f"header must contain x1..x{d} and y1..y{d} exactly")
        return "paired", d, pos
    if layout == "multi":
        pos = {}
        for c, h in enumerate(names, start=1):
            m = _MULTI.match(h)
            if not m:
                raise DataError(f"header column {c + 1} '{h}' is not of the form s<l>_<j>")
            pos[(int(m.group(1)), int(m.group(2)))] = c
        n_sub = max(k[0] for k in pos)
        d = max(k[1] for k in pos)
        want = {(s, j) for s in range(1, n_sub + 1) for j in range(1, d + 1)}
        if set(pos) != want:
            raise DataError(f"header must contain s1_1..s{n_sub}_{d} exactly")
        return "multi", d, pos
    raise DataError(f"unknown layout '{layout}'")


def load_dataset(source, layout: str = "auto"):
    """Read a delimited table into a paired or multi-subject dataset.

    ``source`` is a path or a text stream.  Column 0 holds the time index,
    which is rescaled to [0, 1] when it falls outside that range.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    lines = text.splitlines()
    if not lines:
        raise DataError("empty input")
    reader = csv.reader(io.StringIO(text), delimiter=_sniff_delimiter(lines[0]))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    header, body = rows[0], rows[1:]
    kind, d, pos = _parse_layout(header, layout)
    width = len(header)
    data = np.empty((len(body), width))
    for r, row in enumerate(body, start=1):
        if len(row) != width:
            raise DataError(f"row {r} has {len(row)} fields, expected {width}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"row {r}, column {c + 1} ('{header[c].strip()}'): non-numeric value '{cell}'") from None
            if not math.isfinite(v):
                raise DataError(f"row {r}, column {c + 1} ('{header[c].strip()}'): non-finite value '{cell}'")
            data[r - 1, c] = v
    if data.shape[0] < 2:
        raise DataError(f"need at least 2 data rows, found {data.shape[0]}")

    z = data[:, 0]
    if z.min() < 0.0 or z.max() > 1.0:
        span = z.max() - z.min()
        if span <= 0:
            raise DataError("time column is constant")
        z = (z - z.min()) / span

    if kind == "paired":
        x = data[:, [pos[("x", j)] for j in range(1, d + 1)]]
        y = data[:, [pos[("y", j)] for j in range(1, d + 1)]]
        return PairedDataset(z, x, y)
    n_sub = max(k[0] for k in pos)
    subs = tuple(data[:, [pos[(s, j)] for j in range(1, d + 1)]] for s in range(1, n_sub + 1))
    return MultiSubjectDataset(z, subs)


def write_dataset(ds, dest, delimiter: str = ",") -> None:
    if isinstance(ds, PairedDataset):
        header = ["z"] + [f"x{j}" for j in range(1, ds.d + 1)] + [f"y{j}" for j in range(1, ds.d + 1)]
        table = np.column_stack([ds.z, ds.x, ds.y])
    else:
        header = ["z"] + [f"s{s}_{j}" for s in range(1, ds.n_subjects + 1) for j in range(1, ds.d + 1)]
        table = np.column_stack([ds.z, *ds.subjects])
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    for row in table:
        w.writerow([repr(float(v)) for v in row])
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(buf.getvalue())
    else:
        dest.write(buf.getvalue())
