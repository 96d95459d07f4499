"""Bijection between dimer covers and wired spanning trees with fixed marks.

A perfect matching of the domain's bipartite square graph corresponds to a
spanning tree of the wired B0 graph: the dimer at each interior B0 square
doubles into the tree edge through its matched white square, the wired arcs
and the marked z-edges are fixed, and the dual squares carry the complementary
dual forest.  Both directions are implemented, plus exhaustive verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import B0, DimerGraph, MarkedDomain, derive_tree_graph, dimer_graph
from .errors import EnumerationBudgetExceeded, NotInU, NotPerfect
from .wilson import SpanningTree, contract


@dataclass(eq=False)
class DimerCover:
    """A perfect matching of a DimerGraph, as (black id, white id) pairs."""

    graph: DimerGraph
    matching: frozenset

    def is_perfect(self):
        blacks = [b for b, _ in self.matching]
        whites = [w for _, w in self.matching]
        return (
            len(self.matching) == self.graph.n_black == self.graph.n_white
            and len(set(blacks)) == self.graph.n_black
            and len(set(whites)) == self.graph.n_white
        )

    def weight(self):
        p = 1.0
        for b, w in self.matching:
            p *= self.graph.weight(b, w)
        return p

    def edge_list(self):
        return sorted(self.matching)


def _find_dart(cg, u, v):
    g = cg.g
    cu = u if u < g.m else cg.arc_vertex(int(g.arc_id()[u]))
    for j in range(cg.indptr[cu], cg.indptr[cu + 1]):
        if cg.orig_u[j] == u and cg.orig_v[j] == v:
            return int(j)
    raise NotInU(f"no tree-graph edge from {u} to {v}")


def _dart_weight(cg, j):
    cu = int(np.searchsorted(cg.indptr, j, side="right") - 1)
    prev = cg.cumw[j - 1] if j > cg.indptr[cu] else 0.0
    return float(cg.cumw[j] - prev)


def tree_weight(t: SpanningTree):
    """Product of the non-fixed tree-edge weights (one per free vertex)."""
    p = 1.0
    for u in range(t.cg.m):
        p *= _dart_weight(t.cg, int(t.nxt[u]))
    return p


def _validate_tree(t: SpanningTree):
    cg = t.cg
    for u in range(cg.m):
        if t.nxt[u] < 0:
            raise NotInU(f"free vertex {u} has no outgoing tree edge")
    if not t.in_conditioned_class():
        raise NotInU("a marked arc does not exit through its z-edge")
    state = np.zeros(cg.n_vertices, dtype=np.int8)  # 0 new, 1 active, 2 done
    for r in t.roots:
        state[r] = 2
    for s in range(cg.n_vertices):
        path = []
        v = s
        while state[v] == 0:
            state[v] = 1
            path.append(v)
            v = int(cg.nbr[t.nxt[v]])
        if state[v] == 1:
            raise NotInU("tree edges contain a cycle")
        for u in path:
            state[u] = 2


def dimers_to_tree(m: DimerCover, d: MarkedDomain) -> SpanningTree:
    """Map a perfect matching to its wired spanning tree."""
    if not m.is_perfect():
        raise NotPerfect("matching does not cover every square exactly once")
    g = derive_tree_graph(d)
    cg = contract(g)
    dg = m.graph
    nxt = np.full(cg.n_vertices, -1, dtype=np.int64)
    for b, w in m.matching:
        if dg.black_kind[b] != "primal":
            continue
        bx, by = dg.blacks[b]
        wx, wy = dg.whites[w]
        far = (2 * wx - bx, 2 * wy - by)
        u = g.index[(bx, by)]
        if far not in g.index:
            raise NotInU(f"dimer at {dg.blacks[b]} points outside the domain")
        nxt[u] = _find_dart(cg, u, g.index[far])
    for i in range(g.n_arcs - 1):
        nxt[cg.arc_vertex(i)] = cg.z_darts[i]
    t = SpanningTree(cg, nxt, [cg.arc_vertex(g.n_arcs - 1)])
    _validate_tree(t)
    return t


def _white_axis_neighbors(wsq):
    """((B0 pair), (B1 pair)) of square coordinates around a white square."""
    x, y = wsq
    horiz = ((x - 1, y), (x + 1, y))
    vert = ((x, y - 1), (x, y + 1))
    return (horiz, vert) if x % 2 == 1 else (vert, horiz)


def tree_to_dimers(t: SpanningTree, d: MarkedDomain) -> DimerCover:
    """Inverse bijection: halve tree edges and the induced dual-forest edges."""
    _validate_tree(t)
    g = t.graph
    cg = t.cg
    dg = dimer_graph(d)
    bidx = {s: i for i, s in enumerate(dg.blacks)}
    widx = {s: i for i, s in enumerate(dg.whites)}

    matching = set()
    used = set()
    for u in range(g.m):
        j = int(t.nxt[u])
        a = g.labels[int(cg.orig_u[j])]
        b = g.labels[int(cg.orig_v[j])]
        wsq = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
        if wsq not in widx:
            raise NotInU(f"tree edge {a}-{b} does not cross a domain square")
        matching.add((bidx[a], widx[wsq]))
        used.add(wsq)

    # dual forest on the B1 squares, rooted in the outer face
    OUTER = None
    dual_adj = {OUTER: []}
    n_b1 = 0
    for s, c in d.squares.items():
        if c not in (B0,) and s in bidx and dg.black_kind[bidx[s]] == "dual":
            dual_adj[s] = []
            n_b1 += 1
    unused = [s for s in dg.whites if s not in used]
    if len(unused) != n_b1:
        raise NotInU("tree does not leave one dual edge per dual square")
    for wsq in unused:
        _, (f1, f2) = _white_axis_neighbors(wsq)
        f1 = f1 if f1 in dual_adj else OUTER
        f2 = f2 if f2 in dual_adj else OUTER
        if f1 is OUTER and f2 is OUTER:
            raise NotInU(f"white square {wsq} cannot be matched")
        dual_adj[f1].append((f2, wsq))
        dual_adj[f2].append((f1, wsq))
    parent_white = {}
    stack = [OUTER]
    seen = {OUTER}
    while stack:
        f = stack.pop()
        for nf, wsq in dual_adj[f]:
            if nf not in seen:
                seen.add(nf)
                parent_white[nf] = wsq
                stack.append(nf)
    if len(parent_white) != n_b1:
        raise NotInU("dual forest does not reach every dual square")
    for f, wsq in parent_white.items():
        matching.add((bidx[f], widx[wsq]))

    cover = DimerCover(dg, frozenset(matching))
    if not cover.is_perfect():
        raise NotInU("reconstructed matching is not perfect")
    return cover


def enumerate_covers(dg: DimerGraph, budget=10_000):
    """All perfect matchings of a small dimer graph, by backtracking."""
    if dg.n_black != dg.n_white:
        return []
    order = sorted(range(dg.n_black), key=lambda b: len(dg.adj[b]))
    covers = []
    used = [False] * dg.n_white
    acc = []

    def rec(i):
        if len(covers) > budget:
            raise EnumerationBudgetExceeded(
                f"more than {budget} matchings on this instance"
            )
        if i == len(order):
            covers.append(DimerCover(dg, frozenset(acc)))
            return
        b = order[i]
        for w in dg.adj[b]:
            if not used[w]:
                used[w] = True
                acc.append((b, w))
                rec(i + 1)
                acc.pop()
                used[w] = False

    rec(0)
    return covers


def enumerate_admissible_trees(g, budget=10_000_000):
    """All spanning trees of the wired graph with every z-edge fixed.

    Returns SpanningTree objects (root at the last arc); exhaustive, so only
    for small instances.
    """
    import itertools

    cg = contract(g)
    root = cg.arc_vertex(g.n_arcs - 1)
    base = np.full(cg.n_vertices, -1, dtype=np.int64)
    for i in range(g.n_arcs - 1):
        base[cg.arc_vertex(i)] = cg.z_darts[i]
    choices = [range(cg.indptr[u], cg.indptr[u + 1]) for u in range(cg.m)]
    total = 1
    for c in choices:
        total *= max(len(c), 1)
    if total > budget:
        raise EnumerationBudgetExceeded(f"{total} candidate orientations")
    out = []
    for combo in itertools.product(*choices):
        nxt = base.copy()
        nxt[: cg.m] = combo
        t = SpanningTree(cg, nxt, [root])
        try:
            _validate_tree(t)
        except NotInU:
            continue
        out.append(t)
    return out


def verify_bijection(d: MarkedDomain, budget=10_000):
    """Exhaustively check the bijection on a small domain.

    Report: cover count, admissible tree count, injectivity of the forward
    map, exact image equality, round-trip identity, and edgewise weight
    preservation.
    """
    if budget <= 0:
        raise EnumerationBudgetExceeded("enumeration budget is zero")
    dg = dimer_graph(d)
    covers = enumerate_covers(dg, budget=budget)
    g = derive_tree_graph(d)
    trees = enumerate_admissible_trees(g)

    keys = []
    roundtrip = True
    measure = True
    for m in covers:
        t = dimers_to_tree(m, d)
        keys.append(tuple(int(j) for j in t.nxt))
        back = tree_to_dimers(t, d)
        roundtrip &= back.matching == m.matching
        measure &= m.weight() == tree_weight(t)
    tree_keys = {tuple(int(j) for j in t.nxt) for t in trees}
    injective = len(set(keys)) == len(keys)
    return {
        "covers": len(covers),
        "trees": len(trees),
        "injective": injective,
        "surjective": set(keys) == tree_keys,
        "roundtrip": roundtrip,
        "measure_preserving": measure,
    }
