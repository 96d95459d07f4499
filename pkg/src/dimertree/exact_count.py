"""Exact counting oracles: Kasteleyn determinants, matrix-tree counts,
the inclusion-exclusion determinant for the z-edge first-step event, and the
determinantal Radon-Nikodym derivative for conditioned branches.

All arithmetic is over exact rationals so results are bit-exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .domains import MarkedDomain, WiredGraph, derive_tree_graph
from .errors import (
    DisconnectedGraph,
    NonSquare,
    PathNotSimple,
    SingularSystem,
    UnbalancedBipartition,
)
from .planar import trace_faces


# ---------------------------------------------------------------------------
# exact linear algebra


@dataclass
class ExactMatrix:
    """Dense matrix over exact rationals with optional labels."""

    entries: list  # list of rows of Fraction
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)

    def __post_init__(self):
        rows = len(self.entries)
        cols = len(self.entries[0]) if rows else 0
        if any(len(r) != cols for r in self.entries):
            raise NonSquare("ragged rows")
        if self.row_labels and len(self.row_labels) != rows:
            raise NonSquare("row label count mismatch")
        if self.col_labels and len(self.col_labels) != cols:
            raise NonSquare("column label count mismatch")

    @property
    def shape(self):
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    def det(self):
        r, c = self.shape
        if r != c:
            raise NonSquare(f"matrix is {r}x{c}")
        return exact_det(self.entries)


def exact_det(rows):
    """Determinant of a square matrix of Fractions (Gaussian elimination)."""
    n = len(rows)
    a = [[Fraction(x) for x in row] for row in rows]
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if a[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        det *= a[k][k]
        inv = 1 / a[k][k]
        for i in range(k + 1, n):
            if a[i][k] == 0:
                continue
            f = a[i][k] * inv
            for j in range(k, n):
                a[i][j] -= f * a[k][j]
    return det


def exact_solve(rows, rhs):
    """Solve A x = b exactly; raises SingularSystem on singular A."""
    n = len(rows)
    a = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(rows, rhs)]
    for k in range(n):
        piv = next((i for i in range(k, n) if a[i][k] != 0), None)
        if piv is None:
            raise SingularSystem("exact system is singular")
        a[k], a[piv] = a[piv], a[k]
        inv = 1 / a[k][k]
        for i in range(n):
            if i != k and a[i][k] != 0:
                f = a[i][k] * inv
                for j in range(k, n + 1):
                    a[i][j] -= f * a[k][j]
    return [a[i][n] / a[i][i] for i in range(n)]


def _frac_weight(w):
    f = Fraction(w)
    return f


def exact_hitting(g: WiredGraph, dirichlet, alias=None):
    """Exact harmonic hitting probabilities on a wired graph.

    dirichlet maps vertex id -> Fraction value; all other vertices satisfy the
    weighted mean-value property with fold-back reflection.  Returns a dict
    over all vertices.

    alias optionally maps vertex id -> representative id: an aliased vertex
    carries no equation of its own, and every walk step into it continues from
    its representative.  This realizes the chain in which a fixed path slides
    to its tip (the walk is deterministic along the path), which is the
    conditional structure of a spanning-tree branch given its initial segment.
    """
    V = g.n_vertices
    alias = {int(v): int(r) for v, r in (alias or {}).items()}
    pinned = {int(v): Fraction(x) for v, x in dirichlet.items()}

    def resolve(v):
        seen = set()
        while v in alias:
            if v in seen:
                raise SingularSystem("alias cycle")
            seen.add(v)
            v = alias[v]
        return v

    free = [v for v in range(V) if v not in pinned and v not in alias]
    pos = {v: i for i, v in enumerate(free)}
    rows = [[Fraction(0)] * len(free) for _ in free]
    rhs = [Fraction(0)] * len(free)
    for k, u in enumerate(free):
        nb, wt = g.neighbors(u)
        tot = Fraction(0)
        for v, w in zip(nb, wt):
            w = _frac_weight(float(w))
            tot += w
            v = resolve(int(v))
            if v in pinned:
                rhs[k] += w * pinned[v]
            else:
                rows[k][pos[v]] -= w
        if tot == 0:
            raise SingularSystem(f"vertex {u} has no edges")
        rows[k][k] += tot
    x = exact_solve(rows, rhs)
    out = dict(pinned)
    for k, u in enumerate(free):
        out[u] = x[k]
    for v in alias:
        out[v] = out[resolve(v)]
    return out


# ---------------------------------------------------------------------------
# Kasteleyn counting


def _components(n, adj):
    comp = [-1] * n
    c = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = c
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = c
                    stack.append(v)
        c += 1
    return comp, c


def _kasteleyn_signs(coords, edges, n_vertices):
    """Signs per edge making every bounded face count matchings correctly.

    For a bounded face with 2k boundary edges the product of edge signs is
    (-1)^(k+1); the signed bipartite determinant then counts matchings.
    """
    faces, outer = trace_faces(coords, edges, n_vertices)
    face_of = {}
    for fi, f in enumerate(faces):
        for dart in f:
            face_of[dart] = fi
    eid = {}
    for i, (u, v) in enumerate(edges):
        eid[(u, v)] = i
        eid[(v, u)] = i

    # spanning tree of the primal graph
    adj = [[] for _ in range(n_vertices)]
    for i, (u, v) in enumerate(edges):
        adj[u].append((v, i))
        adj[v].append((u, i))
    in_tree = [False] * len(edges)
    seen = [False] * n_vertices
    stack = [next(u for u, _ in [(edges[0][0], 0)])]
    seen[stack[0]] = True
    while stack:
        u = stack.pop()
        for v, i in adj[u]:
            if not seen[v]:
                seen[v] = True
                in_tree[i] = True
                stack.append(v)

    # dual tree over faces through the non-tree edges, rooted at the outer face
    dual = [[] for _ in faces]
    for i, (u, v) in enumerate(edges):
        if in_tree[i]:
            continue
        f1, f2 = face_of[(u, v)], face_of[(v, u)]
        dual[f1].append((f2, i))
        dual[f2].append((f1, i))
    parent_edge = {outer: None}
    order = [outer]
    qi = 0
    while qi < len(order):
        f = order[qi]
        qi += 1
        for nf, i in dual[f]:
            if nf not in parent_edge:
                parent_edge[nf] = i
                order.append(nf)
    if len(parent_edge) != len(faces):
        raise DisconnectedGraph("faces not connected through non-tree edges")

    sign = [1] * len(edges)
    for f in reversed(order):
        if f == outer:
            continue
        darts = faces[f]
        k = len(darts) // 2
        target = -1 if k % 2 == 0 else 1  # (-1)^(k+1)
        prod = 1
        for u, v in darts:
            if eid[(u, v)] != parent_edge[f]:
                prod *= sign[eid[(u, v)]]
        sign[parent_edge[f]] = target * prod
    return sign


def kasteleyn_count(dg):
    """Number of perfect matchings of a planar bipartite graph, exactly."""
    if dg.n_black != dg.n_white:
        raise UnbalancedBipartition(
            f"{dg.n_black} black vs {dg.n_white} white vertices"
        )
    nb = dg.n_black
    V = nb + dg.n_white
    coords = np.vstack([dg.black_coords, dg.white_coords])
    edges = []
    for b, ws in enumerate(dg.adj):
        for w in ws:
            edges.append((b, nb + w))
    adj = [[] for _ in range(V)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    comp, nc = _components(V, adj)

    total = 1
    for c in range(nc):
        verts = [v for v in range(V) if comp[v] == c]
        blacks = [v for v in verts if v < nb]
        whites = [v for v in verts if v >= nb]
        if len(blacks) != len(whites):
            raise UnbalancedBipartition("component with unequal color classes")
        vmap = {v: i for i, v in enumerate(verts)}
        sub_edges = [(vmap[u], vmap[v]) for u, v in edges if comp[u] == c]
        sub_coords = coords[verts]
        sign = _kasteleyn_signs(sub_coords, sub_edges, len(verts))
        bmap = {v: i for i, v in enumerate(blacks)}
        wmap = {v: i for i, v in enumerate(whites)}
        k = len(blacks)
        mat = [[Fraction(0)] * k for _ in range(k)]
        for s, (u, v) in zip(sign, sub_edges):
            bu, wv = verts[u], verts[v]
            mat[bmap[bu]][wmap[wv]] = s * _frac_weight(
                dg.weight(bu, wv - nb)
            )
        total *= abs(exact_det(mat))
    return total


# ---------------------------------------------------------------------------
# matrix-tree counts


def _laplacian_det(groups, adj_edges):
    """Weighted spanning-structure count: vertices are merged per `groups`
    (a vertex id -> group id map), rows/cols of group -1 are removed."""
    keep = sorted({gid for gid in groups.values() if gid >= 0})
    pos = {gid: i for i, gid in enumerate(keep)}
    k = len(keep)
    L = [[Fraction(0)] * k for _ in range(k)]
    for u, v, w in adj_edges:
        gu, gv = groups[u], groups[v]
        if gu == gv:
            continue
        w = _frac_weight(w)
        if gu >= 0:
            L[pos[gu]][pos[gu]] += w
        if gv >= 0:
            L[pos[gv]][pos[gv]] += w
        if gu >= 0 and gv >= 0:
            L[pos[gu]][pos[gv]] -= w
            L[pos[gv]][pos[gu]] -= w
    return exact_det(L)


def tree_count(g: WiredGraph, mode="ST"):
    """Exact spanning-structure counts on a wired graph.

    mode 'ST': spanning trees with each wired arc contracted to its own
    vertex.  mode 'ST-joined': all arcs contracted to one vertex.  mode
    'SF2': spanning forests in which every arc lies in its own component
    (for two arcs: the two-component forests separating them).
    """
    arc_of = g.arc_id()
    edges = g.edges()

    def check_connected(groups):
        nodes = set(groups.values())
        adj = {n: set() for n in nodes}
        for u, v, _ in edges:
            adj[groups[u]].add(groups[v])
            adj[groups[v]].add(groups[u])
        seen = set()
        stack = [next(iter(nodes))]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(adj[x])
        if seen != nodes:
            raise DisconnectedGraph("graph is not connected through its arcs")

    if mode == "ST":
        groups = {
            v: (v if arc_of[v] < 0 else g.n_vertices + arc_of[v])
            for v in range(g.n_vertices)
        }
        check_connected(groups)
        # remove one row/col: mark the last arc's group as -1
        root = g.n_vertices + g.n_arcs - 1
        groups = {v: (-1 if gid == root else gid) for v, gid in groups.items()}
        return _laplacian_det(groups, edges)
    if mode == "ST-joined":
        groups = {
            v: (v if arc_of[v] < 0 else -1) for v in range(g.n_vertices)
        }
        check_connected(
            {v: (gid if gid >= 0 else g.n_vertices) for v, gid in groups.items()}
        )
        return _laplacian_det(groups, edges)
    if mode == "SF2":
        groups = {
            v: (v if arc_of[v] < 0 else -1) for v in range(g.n_vertices)
        }
        # all arcs removed: forests where each component holds one arc
        return _laplacian_det(groups, edges)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# the first-step event and the branch Radon-Nikodym derivative


def _as_graph(d):
    return derive_tree_graph(d) if isinstance(d, MarkedDomain) else d


def hitting_matrix(g: WiredGraph):
    """Exact (n-1)x(n-1) matrix of h(z_i+; arc_j) hitting probabilities."""
    n = g.n_arcs
    fields = []
    for j in range(n - 1):
        dirichlet = {}
        for a, arc in enumerate(g.wired):
            for v in arc:
                dirichlet[int(v)] = Fraction(1 if a == j else 0)
        fields.append(exact_hitting(g, dirichlet))
    return ExactMatrix(
        [
            [fields[j][int(g.z_plus_idx[i])] for j in range(n - 1)]
            for i in range(n - 1)
        ]
    )


def prob_event_estar(d):
    """Exact probability that every marked arc's branch leaves through its
    z-edge, for the tree with all arcs wired together: det(I - H)."""
    g = _as_graph(d)
    n = g.n_arcs
    if n == 1:
        return Fraction(1)
    H = hitting_matrix(g).entries
    F = [
        [Fraction(1 if i == j else 0) - H[i][j] for j in range(n - 1)]
        for i in range(n - 1)
    ]
    return exact_det(F)


def fomin_rn(d, eta):
    """Exact Radon-Nikodym derivative of the fully conditioned first branch
    against the singly conditioned one, for a partial branch eta.

    eta is a list of free vertex ids starting at z_1+.  Conditionally on the
    branch starting with eta, every walk step into eta continues from its tip
    (other branches may attach to the past of the first branch), so the slit
    hitting probabilities are those of the chain in which eta slides to its
    tip.  Returns a Fraction; 0 when the remaining branch cannot avoid the
    first arc.
    """
    g = _as_graph(d)
    n = g.n_arcs
    if eta is None or len(eta) == 0:
        return Fraction(1)
    eta = [int(v) for v in eta]
    if len(set(eta)) != len(eta):
        raise PathNotSimple("repeated vertex")
    if eta[0] != int(g.z_plus_idx[0]):
        raise PathNotSimple("path must start at the first z-edge endpoint")
    for v in eta:
        if v >= g.m:
            raise PathNotSimple(f"vertex {v} is on a wired arc")
    for u, v in zip(eta, eta[1:]):
        nb, _ = g.neighbors(u)
        if v not in nb:
            raise PathNotSimple(f"vertices {u},{v} are not adjacent")

    field0 = exact_hitting(g, _arc_dirichlet(g, 0))
    h0 = field0[int(g.z_plus_idx[0])]
    det0 = prob_event_estar(g)
    if det0 == 0:
        raise SingularSystem("reference event has probability zero")
    if len(eta) == 1:
        return Fraction(1)

    tip = eta[-1]
    alias = {v: tip for v in eta[:-1]}
    try:
        fields = [
            exact_hitting(g, _arc_dirichlet(g, j), alias=alias)
            for j in range(n - 1)
        ]
    except SingularSystem:
        return Fraction(0)
    H = [
        [fields[j][int(g.z_plus_idx[i])] for j in range(n - 1)]
        for i in range(n - 1)
    ]
    detF = exact_det(
        [
            [Fraction(1 if i == j else 0) - H[i][j] for j in range(n - 1)]
            for i in range(n - 1)
        ]
    )
    h_tip = fields[0][tip]
    if h_tip == 1:
        return Fraction(0)
    return (1 - h0) / det0 * detF / (1 - h_tip)


def _arc_dirichlet(g, j):
    dirichlet = {}
    for a, arc in enumerate(g.wired):
        for v in arc:
            dirichlet[int(v)] = Fraction(1 if a == j else 0)
    return dirichlet


def det_expansion_check(A: ExactMatrix, r):
    """Check det(I - rA) = 1 + sum_k (-r)^k (sum of principal k-minors)."""
    n, m = A.shape
    if n != m:
        raise NonSquare(f"matrix is {n}x{m}")
    r = Fraction(r)
    a = A.entries
    lhs = exact_det(
        [
            [Fraction(1 if i == j else 0) - r * a[i][j] for j in range(n)]
            for i in range(n)
        ]
    )
    rhs = Fraction(1)
    for k in range(1, n + 1):
        s = Fraction(0)
        for idx in itertools.combinations(range(n), k):
            s += exact_det([[a[i][j] for j in idx] for i in idx])
        rhs += (-r) ** k * s
    return lhs == rhs
