"""Undirected graphs, monotone graph properties and critical edge sets.

Nodes are 0-based in code and 1-based in serialized edge lists.

A monotone property P stays true when edges are added.  The critical set
of an edge set E collects the non-edges e for which some supergraph
E' of E satisfies P while E' minus e does not.  Equivalently, there is a
supergraph F of E, not containing e, with P(F) = 0 and P(F + e) = 1.
:func:`critical_set` uses per-property characterizations of this condition;
:func:`critical_set_oracle` enumerates supergraphs literally.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import OracleScale

log = logging.getLogger(__name__)

ORACLE_MAX_D = 6


@dataclass(frozen=True)
class EdgeSet:
    d: int
    edges: tuple = ()

    def __post_init__(self):
        canon = set()
        for j, k in self.edges:
            j, k = int(j), int(k)
            if j == k:
                raise ValueError(f"self-loop at node {j}")
            if not (0 <= j < self.d and 0 <= k < self.d):
                raise ValueError(f"edge ({j}, {k}) outside 0..{self.d - 1}")
            canon.add((min(j, k), max(j, k)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @classmethod
    def from_adjacency(cls, adj):
        adj = np.asarray(adj, dtype=bool)
        jj, kk = np.nonzero(np.triu(adj | adj.T, 1))
        return cls(adj.shape[0], tuple(zip(jj.tolist(), kk.tolist())))

    @classmethod
    def complete(cls, d):
        return cls(d, tuple(combinations(range(d), 2)))

    def adjacency(self):
        m = np.zeros((self.d, self.d), dtype=bool)
        for j, k in self.edges:
            m[j, k] = m[k, j] = True
        return m

    def neighbors(self):
        nb = [set() for _ in range(self.d)]
        for j, k in self.edges:
            nb[j].add(k)
            nb[k].add(j)
        return nb

    def degrees(self):
        deg = np.zeros(self.d, dtype=int)
        for j, k in self.edges:
            deg[j] += 1
            deg[k] += 1
        return deg

    def __len__(self):
        return len(self.edges)

    def __contains__(self, e):
        j, k = e
        return (min(j, k), max(j, k)) in self._edge_set

    @property
    def _edge_set(self):
        return frozenset(self.edges)

    def union(self, other):
        if isinstance(other, EdgeSet):
            other = other.edges
        return EdgeSet(self.d, self.edges + tuple(other))

    def without(self, e):
        j, k = min(e), max(e)
        return EdgeSet(self.d, tuple(x for x in self.edges if x != (j, k)))

    def non_edges(self):
        s = self._edge_set
        return [p for p in combinations(range(self.d), 2) if p not in s]

    def relabel(self, perm):
        perm = list(perm)
        return EdgeSet(self.d, tuple((perm[j], perm[k]) for j, k in self.edges))


# ---------------------------------------------------------------------------
# graph quantities


def max_degree(es: EdgeSet) -> int:
    return int(es.degrees().max()) if es.d else 0


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def component_labels(es: EdgeSet) -> list:
    uf = _UnionFind(es.d)
    for j, k in es.edges:
        uf.union(j, k)
    return [uf.find(v) for v in range(es.d)]


def connected_components(es: EdgeSet) -> list:
    """Partition of the nodes, as a list of sorted node lists ordered by first node."""
    groups = {}
    for v, r in enumerate(component_labels(es)):
        groups.setdefault(r, []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


def isolated_nodes(es: EdgeSet) -> list:
    return [int(v) for v in np.flatnonzero(es.degrees() == 0)]


def _max_clique_size(nb, cand, limit):
    """Size of the largest clique inside ``cand``; stops early once ``limit`` is reached."""
    best = 0

    def expand(size, p):
        nonlocal best
        if not p:
            best = max(best, size)
            return
        if size + len(p) <= best or best >= limit:
            return
        # highest-degree vertex first keeps the bound tight on sparse graphs
        order = sorted(p, key=lambda v: len(nb[v] & p), reverse=True)
        p = set(p)
        for v in order:
            if size + len(p) <= best or best >= limit:
                return
            expand(size + 1, p & nb[v])
            p.discard(v)
        best = max(best, size)

    expand(0, set(cand))
    return best


def clique_number(es: EdgeSet) -> int:
    return _max_clique_size(es.neighbors(), range(es.d), es.d + 1)


def has_clique_larger_than(es: EdgeSet, k: int) -> bool:
    if k < 0:
        return True
    return _max_clique_size(es.neighbors(), range(es.d), k + 1) > k


# ---------------------------------------------------------------------------
# properties

KINDS = ("connected", "components_at_most", "max_degree_greater", "isolated_at_most", "clique_greater")


@dataclass(frozen=True)
class GraphProperty:
    kind: str
    k: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown property kind '{self.kind}'")

    def __call__(self, es: EdgeSet) -> bool:
        return eval_property(self, es)

    def __str__(self):
        return {
            "connected": "connected",
            "components_at_most": f"components<={self.k}",
            "max_degree_greater": f"max-degree>{self.k}",
            "isolated_at_most": f"isolated<={self.k}",
            "clique_greater": f"clique>{self.k}",
        }[self.kind]


PROPERTY_GRAMMAR = ("connected", "components<=K", "max-degree>K", "isolated<=K", "clique>K")
_PATTERNS = (
    (re.compile(r"^connected$"), "connected"),
    (re.compile(r"^components\s*<=\s*(\d+)$"), "components_at_most"),
    (re.compile(r"^max-degree\s*>\s*(\d+)$"), "max_degree_greater"),
    (re.compile(r"^isolated\s*<=\s*(\d+)$"), "isolated_at_most"),
    (re.compile(r"^clique\s*>\s*(\d+)$"), "clique_greater"),
)


def parse_property(text: str) -> GraphProperty:
    t = text.strip().lower()
    for pat, kind in _PATTERNS:
        m = pat.match(t)
        if m:
            return GraphProperty(kind, int(m.group(1)) if m.groups() else 0)
    raise ValueError(f"cannot parse property '{text}'; expected one of: {', '.join(PROPERTY_GRAMMAR)}")


def eval_property(p, es: EdgeSet) -> bool:
    if not isinstance(p, GraphProperty):
        return bool(p(es))
    if p.kind == "connected":
        return len(connected_components(es)) == 1
    if p.kind == "components_at_most":
        return len(connected_components(es)) <= p.k
    if p.kind == "max_degree_greater":
        return max_degree(es) > p.k
    if p.kind == "isolated_at_most":
        return len(isolated_nodes(es)) <= p.k
    return has_clique_larger_than(es, p.k)


# ---------------------------------------------------------------------------
# critical edge sets


def critical_set(es: EdgeSet, p: GraphProperty, budget: int = 200_000) -> EdgeSet:
    """Critical edge set of ``es`` for monotone property ``p``.

    ``budget`` caps the witness search for clique properties; if it runs
    out the remaining candidates are included (a superset) and a warning
    is logged.
    """
    if eval_property(p, es):
        return EdgeSet(es.d)
    return _critical_cached(es, p, budget)


@lru_cache(maxsize=4096)
def _critical_cached(es, p, budget):
    d = es.d
    if p.kind in ("connected", "components_at_most"):
        if p.kind == "components_at_most" and p.k < 1:
            return EdgeSet(d)  # never satisfiable
        lab = component_labels(es)
        return EdgeSet(d, tuple(e for e in combinations(range(d), 2) if lab[e[0]] != lab[e[1]]))
    if p.kind == "isolated_at_most":
        return EdgeSet(d, tuple(_critical_isolated(es, p.k)))
    if p.kind == "max_degree_greater":
        return EdgeSet(d, tuple(_critical_max_degree(es, p.k)))
    return EdgeSet(d, tuple(_critical_clique(es, p.k, budget)))


def _critical_isolated(es, k):
    # F keeps an isolated set I (a subset of E's isolated nodes) and covers
    # the rest; covering needs |V \ I| != 1.  e must touch I and bring the
    # count down to <= k: |I| = k+1, or |I| = k+2 with both endpoints in I.
    d = es.d
    iso = set(isolated_nodes(es))
    m = len(iso)
    a_ok = d - (k + 1) != 1
    b_ok = m >= k + 2 and d - (k + 2) != 1
    out = []
    for u, v in es.non_edges():
        iu, iv = u in iso, v in iso
        if not (iu or iv):
            continue
        if a_ok or (b_ok and iu and iv):
            out.append((u, v))
    return out


def _critical_max_degree(es, k):
    # Need F with all degrees <= k and deg_F(x) = k for an endpoint x of e.
    # Only edges at x matter: raise x to degree k using partners of degree < k.
    deg = es.degrees()
    nb = es.neighbors()
    out = []
    for u, v in es.non_edges():
        for x, y in ((u, v), (v, u)):
            free = sum(1 for w in range(es.d) if w not in (x, y) and w not in nb[x] and deg[w] < k)
            if k - deg[x] <= free:
                out.append((u, v))
                break
    return out


def _critical_clique(es, k, budget):
    # e = (u, v) is critical iff some Q containing u, v with |Q| = k+1 makes
    # F = E + K(Q) - e free of (k+1)-cliques.  A new (k+1)-clique in F must
    # use one of the added edges, so only those are inspected.
    d = es.d
    if k < 1 or k + 1 > d:
        return []
    nb0 = es.neighbors()
    spent = 0
    out = []
    for u, v in es.non_edges():
        others = [w for w in range(d) if w not in (u, v)]
        found = False
        exhausted = True
        for W in combinations(others, k - 1):
            spent += 1
            if spent > budget:
                exhausted = False
                break
            Q = (u, v) + W
            added = [(a, b) for a, b in combinations(Q, 2) if {a, b} != {u, v} and b not in nb0[a]]
            nb = [set(s) for s in nb0]
            for a, b in added:
                nb[a].add(b)
                nb[b].add(a)
            clash = False
            for a, b in added:
                common = nb[a] & nb[b]
                if k - 1 <= 0 or _max_clique_size(nb, common, k - 1) >= k - 1:
                    clash = True
                    break
            if not clash:
                found = True
                break
        if found:
            out.append((u, v))
        elif not exhausted:
            log.warning("clique critical-set search budget exhausted; keeping edge %s conservatively", (u, v))
            out.append((u, v))
    return out


# ---------------------------------------------------------------------------
# brute-force oracle


def _pairs(d):
    return list(combinations(range(d), 2))


def edges_to_mask(es: EdgeSet) -> int:
    index = {p: t for t, p in enumerate(_pairs(es.d))}
    m = 0
    for e in es.edges:
        m |= 1 << index[e]
    return m


def mask_to_edges(mask: int, d: int) -> EdgeSet:
    return EdgeSet(d, tuple(p for t, p in enumerate(_pairs(d)) if mask >> t & 1))


@lru_cache(maxsize=64)
def property_table(p, d: int) -> np.ndarray:
    """``P`` evaluated on every edge set of a ``d``-node graph, indexed by bitmask."""
    if d > ORACLE_MAX_D:
        raise OracleScale(f"exhaustive tables need d <= {ORACLE_MAX_D}, got d={d}")
    m = d * (d - 1) // 2
    return np.array([eval_property(p, mask_to_edges(s, d)) for s in range(1 << m)], dtype=bool)


def critical_set_oracle(es: EdgeSet, p) -> EdgeSet:
    """Literal enumeration over all supergraphs; only for ``d <= 6``."""
    d = es.d
    if d > ORACLE_MAX_D:
        raise OracleScale(f"critical_set_oracle enumerates 2^(d(d-1)/2) graphs; d={d} > {ORACLE_MAX_D}")
    table = property_table(p, d)
    masks = np.arange(table.size)
    base = edges_to_mask(es)
    sup = masks[(masks & base) == base]
    out = []
    for t, e in enumerate(_pairs(d)):
        bit = 1 << t
        if base & bit:
            continue
        cand = sup[(sup & bit) != 0]  # E' contains E and e
        if np.any(table[cand] & ~table[cand ^ bit]):
            out.append(e)
    return EdgeSet(d, tuple(out))


# ---------------------------------------------------------------------------
# serialization


def write_edges(es: EdgeSet, dest) -> None:
    text = "".join(f"{j + 1} {k + 1}\n" for j, k in es.edges)
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)


def read_edges(source, d: int) -> EdgeSet:
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    edges = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"line {ln}: expected 'j k', got '{line}'")
        j, k = int(parts[0]) - 1, int(parts[1]) - 1
        edges.append((j, k))
    return EdgeSet(d, tuple(edges))
