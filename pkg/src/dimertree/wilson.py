"""Wilson's algorithm on wired graphs, conditioned trees, interfaces, Peano curves.

Arcs are contracted to super-vertices internally; darts remember their
original endpoints so sampled trees live on the original vertex set.  The
conditioned law (each non-root arc's branch leaving through its z-edge) is
sampled by rejection with early abort.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .domains import MarkedDomain, WiredGraph, derive_tree_graph
from .errors import (
    NonTermination,
    NotN2Domain,
    RejectionBudgetExceeded,
    UnreachableVertex,
)

STEP_CAP = 10**9


@dataclass
class ContractedGraph:
    """Wired graph with each arc contracted to one super-vertex.

    Vertices 0..m-1 are the free vertices of the underlying graph; vertex
    m+i is arc i.  orig_u/orig_v give each dart's endpoints in the original
    vertex numbering.
    """

    g: WiredGraph
    indptr: np.ndarray
    nbr: np.ndarray
    cumw: np.ndarray
    orig_u: np.ndarray
    orig_v: np.ndarray
    z_darts: np.ndarray  # dart at super-vertex m+i realizing (z_i -> z_i+)

    @property
    def m(self):
        return self.g.m

    @property
    def n_vertices(self):
        return self.g.m + self.g.n_arcs

    def arc_vertex(self, i):
        return self.g.m + i


def contract(g: WiredGraph) -> ContractedGraph:
    cache = getattr(g, "_contracted", None)
    if cache is not None:
        return cache
    m, n = g.m, g.n_arcs
    arc_of = g.arc_id()

    def cvert(v):
        return v if v < m else m + arc_of[v]

    darts = [[] for _ in range(m + n)]  # (target_contracted, w, ou, ov)
    for u in range(g.n_vertices):
        cu = cvert(u)
        nb, w = g.neighbors(u)
        for v, x in zip(nb, w):
            cv = cvert(int(v))
            if cu == cv:
                continue  # intra-arc edge
            darts[cu].append((cv, float(x), u, int(v)))

    indptr = np.zeros(m + n + 1, dtype=np.int64)
    for i, ds in enumerate(darts):
        indptr[i + 1] = indptr[i] + len(ds)
    E = int(indptr[-1])
    nbr = np.zeros(E, dtype=np.int64)
    cumw = np.zeros(E, dtype=np.float64)
    orig_u = np.zeros(E, dtype=np.int64)
    orig_v = np.zeros(E, dtype=np.int64)
    for i, ds in enumerate(darts):
        acc = 0.0
        for k, (cv, x, ou, ov) in enumerate(ds):
            j = indptr[i] + k
            nbr[j] = cv
            acc += x
            cumw[j] = acc
            orig_u[j] = ou
            orig_v[j] = ov

    z_darts = np.full(len(g.z_idx), -1, dtype=np.int64)
    for i in range(len(g.z_idx)):
        cu = m + i
        for j in range(indptr[cu], indptr[cu + 1]):
            if orig_u[j] == g.z_idx[i] and orig_v[j] == g.z_plus_idx[i]:
                z_darts[i] = j
                break
    cg = ContractedGraph(g, indptr, nbr, cumw, orig_u, orig_v, z_darts)
    object.__setattr__(g, "_contracted", cg)
    return cg


@dataclass
class LerwPath:
    """A simple lattice path with cumulative turning angles."""

    vertices: list  # original vertex ids
    coords: np.ndarray  # (k, 2)
    winding: np.ndarray  # winding[i] = total turning accumulated at vertex i

    def __len__(self):
        return len(self.vertices)


def _path_from_coords(vertices, coords):
    coords = np.asarray(coords, dtype=np.float64)
    k = len(vertices)
    winding = np.zeros(k)
    if k >= 3:
        d = np.diff(coords, axis=0)
        ang = np.arctan2(d[:, 1], d[:, 0])
        turns = np.angle(np.exp(1j * np.diff(ang)))
        winding[2:] = np.cumsum(turns)
    return LerwPath(list(vertices), coords, winding)


@dataclass
class SpanningTree:
    """Rooted spanning tree/forest with contracted wired arcs as roots."""

    cg: ContractedGraph
    nxt: np.ndarray  # out-dart per contracted vertex, -1 at roots
    roots: list  # contracted root ids
    seed: int = 0
    accepts: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def graph(self):
        return self.cg.g

    def parent(self, cv):
        j = self.nxt[cv]
        return (-1, None) if j < 0 else (int(self.cg.nbr[j]), int(j))

    def branch_darts(self, cv):
        """Darts from contracted vertex cv to its root."""
        out = []
        seen = set()
        while self.nxt[cv] >= 0:
            if cv in seen:
                raise UnreachableVertex(f"cycle reached from {cv}")
            seen.add(cv)
            out.append(int(self.nxt[cv]))
            cv = int(self.cg.nbr[self.nxt[cv]])
        return out

    def branch_path(self, cv) -> LerwPath:
        darts = self.branch_darts(cv)
        g = self.graph
        verts = [int(self.cg.orig_u[darts[0]])]
        for j in darts:
            verts.append(int(self.cg.orig_v[j]))
        return _path_from_coords(verts, g.coords[verts])

    def edges_original(self, include_arcs=True):
        """Tree edges as original-vertex pairs; arc edges included by default."""
        out = []
        for cv in range(self.cg.n_vertices):
            j = self.nxt[cv]
            if j >= 0:
                out.append((int(self.cg.orig_u[j]), int(self.cg.orig_v[j])))
        if include_arcs:
            g = self.graph
            for arc in g.wired:
                for a, b in zip(arc, arc[1:]):
                    out.append((int(a), int(b)))
        return out

    def in_conditioned_class(self):
        """True when every non-root arc's out-dart is its z-edge."""
        cg = self.cg
        for i, j in enumerate(cg.z_darts):
            cv = cg.arc_vertex(i)
            if cv in self.roots:
                continue
            if self.nxt[cv] != j:
                return False
        return True

    def to_json(self):
        rec = {
            "seed": int(self.seed),
            "accepts": int(self.accepts),
            "tree_edges": self.edges_original(),
        }
        g = self.graph
        if g.n_arcs == 2 and not any(
            self.cg.arc_vertex(0) == r for r in self.roots
        ):
            rec["interface"] = [list(map(float, p)) for p in
                                extract_interface(self).coords]
            for side in ("L", "R"):
                rec[f"peano_{side}"] = [
                    [float(a), float(b)] for a, b in extract_peano(self, side).points
                ]
        return json.dumps(rec)


def _check_reachable(cg, roots):
    ok = np.zeros(cg.n_vertices, dtype=bool)
    stack = list(roots)
    for r in roots:
        ok[r] = True
    while stack:
        u = stack.pop()
        for j in range(cg.indptr[u], cg.indptr[u + 1]):
            v = cg.nbr[j]
            if not ok[v]:
                ok[v] = True
                stack.append(v)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise UnreachableVertex(f"vertex {bad} cannot reach a wired component")


def lerw(g: WiredGraph, start, seed) -> LerwPath:
    """Loop-erased reflected walk from a free vertex to the wired arcs."""
    cg = contract(g)
    absorbing = np.zeros(cg.n_vertices, dtype=bool)
    for i in range(g.n_arcs):
        absorbing[cg.arc_vertex(i)] = True
    darts, length, status, steps, _ = K.lerw_kernel(
        cg.indptr, cg.nbr, cg.cumw, absorbing, int(start), np.uint64(seed), STEP_CAP
    )
    if status == K.STATUS_STEP_CAP:
        raise NonTermination(f"walk exceeded {STEP_CAP} steps (from {start})")
    if status == K.STATUS_STUCK:
        raise UnreachableVertex(f"vertex {start} has no outgoing edges")
    verts = [int(start)]
    for j in darts[:length]:
        verts.append(int(cg.orig_v[j]))
    return _path_from_coords(verts, g.coords[verts])


def wilson_sample(g: WiredGraph, seed, vertex_order=None) -> SpanningTree:
    """Wired spanning forest: every wired arc is a root."""
    cg = contract(g)
    roots = [cg.arc_vertex(i) for i in range(g.n_arcs)]
    _check_reachable(cg, roots)
    mask = np.zeros(cg.n_vertices, dtype=bool)
    mask[roots] = True
    if vertex_order is None:
        order = np.arange(cg.m, dtype=np.int64)
    else:
        order = np.asarray(vertex_order, dtype=np.int64)
    nxt, status, steps = K.wilson_kernel(
        cg.indptr, cg.nbr, cg.cumw, mask, order, np.uint64(seed), STEP_CAP
    )
    if status == K.STATUS_STEP_CAP:
        raise NonTermination(f"Wilson exceeded {STEP_CAP} steps")
    if status == K.STATUS_STUCK:
        raise UnreachableVertex("walk reached a vertex with no edges")
    return SpanningTree(cg, nxt, roots, seed=int(seed))


def sample_conditioned(d, seed, max_rejects=100_000) -> SpanningTree:
    """Tree from the conditioned class: single root at the last arc, each
    other arc's branch leaving through its z-edge.

    Accepts a MarkedDomain or a WiredGraph carrying z marks.
    """
    g = derive_tree_graph(d) if isinstance(d, MarkedDomain) else d
    cg = contract(g)
    n = g.n_arcs
    root = cg.arc_vertex(n - 1)
    _check_reachable(cg, [root])
    mask = np.zeros(cg.n_vertices, dtype=bool)
    mask[root] = True
    cond_vertices = np.array([cg.arc_vertex(i) for i in range(n - 1)], dtype=np.int64)
    cond_darts = cg.z_darts.copy()
    order = np.arange(cg.m, dtype=np.int64)
    nxt, attempts, status, steps = K.conditioned_wilson_kernel(
        cg.indptr,
        cg.nbr,
        cg.cumw,
        mask,
        cond_vertices,
        cond_darts,
        order,
        np.uint64(seed),
        int(max_rejects),
        STEP_CAP,
    )
    if status == K.STATUS_STEP_CAP:
        raise NonTermination(f"conditioned Wilson exceeded {STEP_CAP} steps")
    if status == K.STATUS_BUDGET:
        raise RejectionBudgetExceeded(
            f"no accepted sample in {max_rejects} attempts",
            acceptance_rate=0.0 if attempts == 0 else 1.0 / attempts,
        )
    t = SpanningTree(cg, nxt, [root], seed=int(seed), accepts=int(attempts))
    assert t.in_conditioned_class()
    return t


def extract_interface(t: SpanningTree, d=None) -> LerwPath:
    """For n=2 conditioned trees: the branch from b (= z_1) to the root arc."""
    g = t.graph
    if g.n_arcs != 2:
        raise NotN2Domain(f"domain has {g.n_arcs} wired arcs")
    if "interface" not in t._cache:
        t._cache["interface"] = t.branch_path(t.cg.arc_vertex(0))
    return t._cache["interface"]


@dataclass
class PeanoCurve:
    side: str
    points: np.ndarray  # polyline in the plane
    darts: list  # (orig_u, orig_v) tree darts traversed, in order
    start_vertex: int
    end_vertex: int


def _tree_contour(t: SpanningTree):
    """Closed contour of the tree (with arc edges), as a dart cycle."""
    g = t.graph
    edges = t.edges_original()
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    coords = g.coords
    rot, pos = {}, {}
    for v, nbs in adj.items():
        r = sorted(
            nbs,
            key=lambda u: math.atan2(
                coords[u][1] - coords[v][1], coords[u][0] - coords[v][0]
            ),
        )
        rot[v] = r
        pos[v] = {u: i for i, u in enumerate(r)}
    start = (edges[0][0], edges[0][1])
    contour = []
    a, b = start
    while True:
        contour.append((a, b))
        r = rot[b]
        a, b = b, r[(pos[b][a] - 1) % len(r)]
        if (a, b) == start:
            break
    if len(contour) != 2 * len(edges):
        raise UnreachableVertex("tree contour is not a single closed walk")
    return contour, rot, pos


def _outward_angle(g, v):
    """Direction of the boundary vertex v's empty exterior sector."""
    nb, _ = g.neighbors(v)
    s = np.zeros(2)
    for u in nb:
        dvec = g.coords[u] - g.coords[v]
        s -= dvec / np.linalg.norm(dvec)
    if np.linalg.norm(s) < 1e-12:
        s = np.array([1.0, 0.0])
    return math.atan2(s[1], s[0])


def _cut_positions(t, contour, rot, pos, marked):
    """Contour indices i such that the visit between dart i and i+1 sweeps
    the exterior sector of a marked vertex."""
    g = t.graph
    out_ang = {v: _outward_angle(g, v) for v in marked}
    cuts = []
    n = len(contour)
    for i in range(n):
        u, v = contour[i]
        if v not in marked:
            continue
        w = contour[(i + 1) % n][1]
        a1 = math.atan2(*(g.coords[u] - g.coords[v])[::-1])
        a2 = math.atan2(*(g.coords[w] - g.coords[v])[::-1])
        nv = out_ang[v]
        cw_uw = (a1 - a2) % (2 * math.pi)
        cw_un = (a1 - nv) % (2 * math.pi)
        if len(rot[v]) == 1 or cw_un <= cw_uw + 1e-12:
            cuts.append((i, v))
    return cuts


def extract_peano(t: SpanningTree, side, d=None) -> PeanoCurve:
    """Peano curve on one side of the interface of an n=2 conditioned tree.

    side 'L': from d (root-arc counterclockwise end) to a; side 'R': from c
    (root-arc clockwise end) to b.
    """
    if side not in ("L", "R"):
        raise ValueError("side must be 'L' or 'R'")
    g = t.graph
    if g.n_arcs != 2:
        raise NotN2Domain(f"domain has {g.n_arcs} wired arcs")
    key = f"peano_{side}"
    if key in t._cache:
        return t._cache[key]

    contour, rot, pos = _tree_contour(t)
    arc0 = [int(v) for v in g.wired[0]]
    arc1 = [int(v) for v in g.wired[1]]
    c_v, d_v = arc1[0], arc1[-1]  # x_{2n} and x_1
    a_v, b_v = arc0[0], arc0[-1]  # x_2 and x_3
    marked = {c_v, d_v, a_v, b_v}
    cuts = _cut_positions(t, contour, rot, pos, marked)
    if len(cuts) < 3:
        raise UnreachableVertex("could not cut the tree contour at the corners")

    n = len(contour)
    segments = []
    for k in range(len(cuts)):
        i0, v0 = cuts[k]
        i1, v1 = cuts[(k + 1) % len(cuts)]
        darts = [contour[(i0 + 1 + j) % n] for j in range((i1 - i0) % n)]
        segments.append((v0, v1, darts))

    free = set(range(g.m))

    def is_free_segment(seg):
        return any(u in free or v in free for u, v in seg[2])

    free_segs = [s for s in segments if is_free_segment(s)]
    if len(free_segs) != 2:
        raise UnreachableVertex(
            f"expected 2 interior contour segments, found {len(free_segs)}"
        )
    want = d_v if side == "L" else c_v
    cand = [s for s in free_segs if want in (s[0], s[1])]
    if len(cand) != 1:
        # d and c coincide only on degenerate root arcs; disambiguate by the
        # other curve's anchor
        other = c_v if side == "L" else d_v
        cand = [s for s in free_segs if other not in (s[0], s[1])]
    v0, v1, darts = cand[0]
    if v1 == want and v0 != want:
        # run against the contour; the corridor stays on each dart's left
        darts = list(reversed(darts))
        v0, v1 = v1, v0

    pts = [tuple(g.coords[v0])]
    for u, v in darts:
        p, q = g.coords[u], g.coords[v]
        mid = (p + q) / 2.0
        dvec = q - p
        nrm = np.array([-dvec[1], dvec[0]])
        nrm /= np.linalg.norm(nrm)
        pts.append(tuple(mid + 0.25 * nrm))
    pts.append(tuple(g.coords[v1]))
    curve = PeanoCurve(
        side=side,
        points=np.asarray(pts),
        darts=darts,
        start_vertex=v0,
        end_vertex=v1,
    )
    t._cache[key] = curve
    return curve
