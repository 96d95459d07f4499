"""Discrete harmonic fields for the reflected/killed walk on a wired graph.

The walk moves along graph edges with probability proportional to edge
weight; boundary edges that are absent fold the walk back (zero-Neumann
reflection).  Wired arcs are killing (Dirichlet) boundary.  Where a vertex
carries both Dirichlet data and reflection, the Dirichlet condition wins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domains import WiredGraph
from .errors import DivisionByZero, EmptySet, SingularSystem

_DIRECT_LIMIT = 50_000
_TOL = 1e-10


@dataclass
class HarmonicField:
    """Solved harmonic field on a wired graph."""

    graph: WiredGraph
    values: np.ndarray
    dirichlet: dict  # vertex -> pinned value

    def __getitem__(self, v):
        return float(self.values[v])

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["vertex_id", "x", "y", "value"])
            for v in range(len(self.values)):
                w.writerow(
                    [v, self.graph.coords[v, 0], self.graph.coords[v, 1],
                     repr(float(self.values[v]))]
                )


def solve_dirichlet_neumann(g: WiredGraph, dirichlet) -> HarmonicField:
    """Solve the discrete Dirichlet problem with fold-back reflection elsewhere.

    dirichlet maps vertex ids to pinned values; every other vertex gets the
    weighted mean of its neighbors.  Residual is driven below 1e-10 relative.
    """
    if not dirichlet:
        raise SingularSystem("no Dirichlet vertex")
    V = g.n_vertices
    pinned = np.zeros(V, dtype=bool)
    vals = np.zeros(V)
    for v, x in dirichlet.items():
        pinned[v] = True
        vals[v] = x

    free = np.flatnonzero(~pinned)
    if free.size == 0:
        return HarmonicField(g, vals, dict(dirichlet))
    pos = -np.ones(V, dtype=np.int64)
    pos[free] = np.arange(free.size)

    rows, cols, data = [], [], []
    rhs = np.zeros(free.size)
    for k, u in enumerate(free):
        nb, w = g.neighbors(u)
        tot = w.sum()
        if tot == 0:
            raise SingularSystem(f"vertex {u} has no edges")
        rows.append(k)
        cols.append(k)
        data.append(tot)
        for v, x in zip(nb, w):
            if pinned[v]:
                rhs[k] += x * vals[v]
            else:
                rows.append(k)
                cols.append(pos[v])
                data.append(-x)
    A = sp.csr_matrix((data, (rows, cols)), shape=(free.size, free.size))

    _check_reachability(g, pinned, free)

    if free.size <= _DIRECT_LIMIT:
        x = spla.spsolve(A.tocsc(), rhs)
    else:
        ml = spla.spilu(A.tocsc(), drop_tol=1e-5)
        M = spla.LinearOperator(A.shape, ml.solve)
        x, info = spla.cg(A, rhs, rtol=1e-13, atol=0.0, M=M, maxiter=20_000)
        if info != 0:
            x = spla.spsolve(A.tocsc(), rhs)
    scale = max(np.linalg.norm(rhs), 1e-300)
    res = np.linalg.norm(A @ x - rhs) / scale
    if res >= _TOL:
        raise SingularSystem(f"solver stalled at relative residual {res:.3e}")
    vals[free] = x

    lo, hi = min(dirichlet.values()), max(dirichlet.values())
    assert vals.min() >= lo - 1e-9 and vals.max() <= hi + 1e-9, (
        "maximum principle violated"
    )
    return HarmonicField(g, vals, dict(dirichlet))


def _check_reachability(g, pinned, free):
    """Every free vertex must reach a pinned vertex through free vertices."""
    ok = np.zeros(g.n_vertices, dtype=bool)
    stack = []
    for u in free:
        nb, _ = g.neighbors(u)
        if pinned[nb].any():
            ok[u] = True
            stack.append(u)
    while stack:
        u = stack.pop()
        nb, _ = g.neighbors(u)
        for v in nb:
            if not pinned[v] and not ok[v]:
                ok[v] = True
                stack.append(v)
    if not ok[free].all():
        raise SingularSystem("a free vertex cannot reach any Dirichlet vertex")


def _arc_cache(g):
    cache = getattr(g, "_harmonic_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(g, "_harmonic_cache", cache)
    return cache


def arc_field(g: WiredGraph, target_arc_index) -> HarmonicField:
    """Field of probabilities that the walk is killed on the given wired arc."""
    cache = _arc_cache(g)
    if target_arc_index not in cache:
        dirichlet = {}
        for i, arc in enumerate(g.wired):
            for v in arc:
                dirichlet[int(v)] = 1.0 if i == target_arc_index else 0.0
        cache[target_arc_index] = solve_dirichlet_neumann(g, dirichlet)
    return cache[target_arc_index]


def hitting_prob_arc(g: WiredGraph, v, target_arc_index) -> float:
    """P[walk from v is killed on wired arc target_arc_index]."""
    return arc_field(g, target_arc_index)[v]


def hitting_prob_set(g: WiredGraph, v, A) -> float:
    """P[walk from v hits the set A before being killed on a wired arc].

    Vertices of A lying on a wired arc count as hitting A.
    """
    A = set(int(a) for a in A)
    if not A:
        raise EmptySet("absorbing set is empty")
    wired = set()
    for arc in g.wired:
        wired.update(int(u) for u in arc)
    dirichlet = {u: 0.0 for u in wired}
    for a in A:
        dirichlet[a] = 1.0
    return solve_dirichlet_neumann(g, dirichlet)[v]


def harmonic_ratio_at(g: WiredGraph, base_vertex, A, reference_arc) -> float:
    """Ratio h_A(b) / h_ref(b) of hitting probabilities at a boundary-adjacent vertex."""
    href = hitting_prob_arc(g, base_vertex, reference_arc)
    if href == 0.0:
        raise DivisionByZero("reference hitting probability vanishes")
    return hitting_prob_set(g, base_vertex, A) / href
