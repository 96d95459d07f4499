"""Piecewise-Temperleyan lattice domains and the graphs of the dimer/tree correspondence.

A domain is a simply connected union of unit squares bounded by a simple
rectilinear polygon.  Squares carry the checkerboard colouring; black squares
on even rows form the B0 sublattice, black squares on odd rows form B1.  A
domain qualifies when it has 2n white corners, n+1 of them convex and n-1
concave.  From the polygon we derive:

* the tree graph: B0 squares inside the domain plus the outside B0 squares
  touching the closed domain, with n wired boundary arcs c_1..c_n and
  reflecting stretches in between;
* the marked vertices x_1..x_2n (arc endpoints) and the pairs (z_i, z_i+)
  sitting at the concave white corners;
* the dimer graph: all squares of the domain with unit adjacency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArcOverlap,
    AssumptionViolated,
    NonSimpleBoundary,
    NotPiecewiseTemperleyan,
)

WHITE = "white"
B0 = "B0"
B1 = "B1"


def square_color(x, y):
    """Colour of the unit square with lower-left corner (x, y)."""
    if (x + y) % 2 == 0:
        return B0 if y % 2 == 0 else B1
    return WHITE


def _expand_polygon(points):
    """Expand a rectilinear vertex list into unit steps, validated and CCW-oriented.

    Accepts vertices with collinear runs (segments longer than one unit).
    Returns the list of lattice vertices visited, one per unit step, without
    repeating the starting vertex at the end.
    """
    pts = [tuple(int(c) for c in p) for p in points]
    if len(pts) < 4:
        raise NonSimpleBoundary("polygon needs at least 4 vertices")
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    verts = []
    for i, p in enumerate(pts):
        q = pts[(i + 1) % len(pts)]
        dx, dy = q[0] - p[0], q[1] - p[1]
        if (dx != 0) == (dy != 0):
            raise NonSimpleBoundary(f"segment {p}->{q} is not axis-aligned")
        n = abs(dx) + abs(dy)
        sx, sy = (dx > 0) - (dx < 0), (dy > 0) - (dy < 0)
        for k in range(n):
            verts.append((p[0] + k * sx, p[1] + k * sy))
    if len(set(verts)) != len(verts):
        raise NonSimpleBoundary("boundary revisits a vertex")
    # shoelace: positive area means counterclockwise
    area2 = sum(
        verts[i][0] * verts[(i + 1) % len(verts)][1]
        - verts[(i + 1) % len(verts)][0] * verts[i][1]
        for i in range(len(verts))
    )
    if area2 == 0:
        raise NonSimpleBoundary("polygon encloses no area")
    if area2 < 0:
        verts = [verts[0]] + verts[:0:-1]
    return verts


def _squares_inside(verts):
    """Set of lower-left corners of unit squares enclosed by the unit-step polygon."""
    vertical = {}
    for i, p in enumerate(verts):
        q = verts[(i + 1) % len(verts)]
        if p[0] == q[0]:
            y = min(p[1], q[1])
            vertical.setdefault(y, []).append(p[0])
    squares = set()
    for y, xs in vertical.items():
        xs = sorted(xs)
        if len(xs) % 2 != 0:
            raise NonSimpleBoundary("odd number of vertical crossings")
        for a, b in zip(xs[::2], xs[1::2]):
            for x in range(a, b):
                squares.add((x, y))
    return squares


_LEFT_SQUARE = {
    (1, 0): lambda u: (u[0], u[1]),
    (-1, 0): lambda u: (u[0] - 1, u[1] - 1),
    (0, 1): lambda u: (u[0] - 1, u[1]),
    (0, -1): lambda u: (u[0], u[1] - 1),
}


def _corners(verts):
    """Corner list [(vertex, 'convex'|'concave', corner_square)] along the CCW boundary.

    The corner square is the inside square filling a convex corner, and the
    outside square filling the notch of a concave corner.
    """
    out = []
    m = len(verts)
    for i in range(m):
        u, v, w = verts[i - 1], verts[i], verts[(i + 1) % m]
        d1 = (v[0] - u[0], v[1] - u[1])
        d2 = (w[0] - v[0], w[1] - v[1])
        cross = d1[0] * d2[1] - d1[1] * d2[0]
        if cross == 0:
            continue
        if cross > 0:
            sq = _LEFT_SQUARE[d2](v)
            out.append((v, "convex", sq))
        else:
            # exterior wedge square: right of both edges
            rsq = _LEFT_SQUARE[(-d1[0], -d1[1])](v)
            out.append((v, "concave", rsq))
    return out


@dataclass
class MarkedDomain:
    """A validated piecewise-Temperleyan domain with all derived markings."""

    polygon: list
    squares: dict
    n: int
    white_corners: list
    arcs: list  # c_1..c_n, each a CCW-ordered list of outer B0 coords
    x_marks: list  # x_1..x_2n as B0 coords
    z_marks: list  # (z_i, z_i_plus, w_i) for i = 1..n-1
    boundary_edges: list = field(default_factory=list)
    edge_weights: dict = field(default_factory=dict)

    @property
    def interior_b0(self):
        return sorted(s for s, c in self.squares.items() if c == B0)

    @property
    def outer_b0(self):
        return [v for arc in self.arcs for v in arc]

    def weight(self, a, b):
        """Weight of the tree-graph edge between B0 squares a and b."""
        return self.edge_weights.get((min(a, b), max(a, b)), 1)

    def to_json(self):
        return json.dumps(
            {"type": "square_lattice", "boundary": [list(p) for p in self.polygon]}
        )


def _touching_outer_b0(squares):
    """Outside B0 squares whose closed unit square touches the closed domain."""
    out = set()
    for (x, y) in squares:
        for dx in (-2, -1, 0, 1, 2):
            for dy in (-2, -1, 0, 1, 2):
                c = (x + dx, y + dy)
                if c in squares or square_color(*c) != B0:
                    continue
                # closed squares [x,x+1]x[y,y+1] and [cx,cx+1]x[cy,cy+1] touch
                if abs(dx) <= 1 and abs(dy) <= 1:
                    out.add(c)
    return out


def _b0_neighbors(v):
    x, y = v
    return [((x + 2, y), (x + 1, y)), ((x - 2, y), (x - 1, y)),
            ((x, y + 2), (x, y + 1)), ((x, y - 2), (x, y - 1))]


def _group_by_stretch(contact, white_positions, n, M):
    """Group outer squares into wired arcs, one per boundary stretch.

    The 2n white corners cut the boundary into 2n stretches; a stretch owning
    outer B0 squares is wired, the others reflect.  Wired and reflecting
    stretches must alternate.  Returns arcs in CCW cyclic order, vertices of
    each arc in CCW boundary order.
    """
    import bisect

    def stretch_of(p):
        return (bisect.bisect_right(white_positions, p) - 1) % (2 * n)

    groups = {}
    for s, poss in contact.items():
        ks = {stretch_of(p) for p in poss}
        if len(ks) != 1:
            raise AssumptionViolated(f"outer square {s} spans two boundary stretches")
        groups.setdefault(ks.pop(), []).append(s)
    if len(groups) != n:
        raise AssumptionViolated(
            f"{len(groups)} boundary stretches carry outer squares, expected n={n}"
        )
    ks = sorted(groups)
    if any((k - ks[0]) % 2 for k in ks):
        raise AssumptionViolated("wired and reflecting stretches do not alternate")
    arcs = []
    for k in ks:
        start = white_positions[k % (2 * n)]
        arcs.append(
            sorted(groups[k], key=lambda s: (min((p - start) % M for p in contact[s]), s))
        )
    return arcs


def build_piecewise_temperleyan(boundary, edge_weights=None):
    """Build a MarkedDomain from a simple rectilinear lattice polygon.

    edge_weights optionally assigns positive weights to tree-graph edges,
    keyed by unordered pairs of B0 lower-left coordinates.
    """
    verts = _expand_polygon(boundary)
    squares_set = _squares_inside(verts)
    squares = {s: square_color(*s) for s in squares_set}
    corners = _corners(verts)
    white_corners = [(v, kind) for v, kind, sq in corners if square_color(*sq) == WHITE]
    n2 = len(white_corners)
    convex = sum(1 for _, k in white_corners if k == "convex")
    concave = n2 - convex
    if n2 % 2 != 0 or n2 < 4:
        raise NotPiecewiseTemperleyan(
            f"{n2} white corners; need an even count 2n with n >= 2"
        )
    n = n2 // 2
    if convex != n + 1 or concave != n - 1:
        raise NotPiecewiseTemperleyan(
            f"white corners split {convex} convex / {concave} concave; "
            f"need {n + 1} / {n - 1}"
        )
    _check_standing_assumption(verts, corners, squares_set)

    outer = _touching_outer_b0(squares_set)

    # contact positions along the boundary for every outer square
    edge_index = {}
    for i, p in enumerate(verts):
        q = verts[(i + 1) % len(verts)]
        edge_index[(p, q)] = i
    vert_index = {p: i for i, p in enumerate(verts)}
    contact = {}
    for (x, y) in outer:
        pos = set()
        cs = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]
        for a, b in zip(cs, cs[1:] + cs[:1]):
            if (a, b) in edge_index:
                pos.add(edge_index[(a, b)])
            if (b, a) in edge_index:
                pos.add(edge_index[(b, a)])
        if not pos:
            for c in cs:
                if c in vert_index:
                    pos.add(vert_index[c])
        if not pos:
            raise AssumptionViolated(f"outer square {(x, y)} has no boundary contact")
        contact[(x, y)] = sorted(pos)

    white_positions = sorted(vert_index[v] for v, _ in white_corners)
    arcs = _group_by_stretch(contact, white_positions, n, len(verts))

    # z-marks from the concave white corners
    zinfo = []
    for v, kind, sq in corners:
        if kind != "concave" or square_color(*sq) != WHITE:
            continue
        w = sq
        b0_pair = [(w[0] + 1, w[1]), (w[0] - 1, w[1])]
        if square_color(*b0_pair[0]) != B0:
            b0_pair = [(w[0], w[1] + 1), (w[0], w[1] - 1)]
        inside = [b for b in b0_pair if b in squares_set]
        outside = [b for b in b0_pair if b not in squares_set]
        if len(inside) != 1 or len(outside) != 1 or outside[0] not in outer:
            raise AssumptionViolated(f"concave corner at {v} has no (z, z+) pair")
        zinfo.append((outside[0], inside[0], w))

    arc_of = {}
    for i, arc in enumerate(arcs):
        for u in arc:
            arc_of[u] = i
    z_by_arc = {}
    for z, zp, w in zinfo:
        i = arc_of[z]
        if i in z_by_arc:
            raise AssumptionViolated("two concave corners attach to one arc")
        if z != arcs[i][0] and z != arcs[i][-1]:
            raise AssumptionViolated(f"z vertex {z} is not an arc endpoint")
        z_by_arc[i] = (z, zp, w)
    roots = [i for i in range(n) if i not in z_by_arc]
    if len(roots) != 1:
        raise AssumptionViolated("root arc is not unique")
    order = [(roots[0] + 1 + k) % n for k in range(n)]
    arcs = [arcs[i] for i in order]
    z_marks = [z_by_arc[i] for i in order[:-1]]

    x_marks = [None] * (2 * n)  # x_1..x_2n stored at indices 0..2n-1
    for i, arc in enumerate(arcs, start=1):
        x_marks[(2 * i) % (2 * n) - 1] = arc[0]
        x_marks[(2 * i + 1) % (2 * n) - 1] = arc[-1]

    boundary_edges = [(verts[i], verts[(i + 1) % len(verts)]) for i in range(len(verts))]
    return MarkedDomain(
        polygon=verts,
        squares=squares,
        n=n,
        white_corners=white_corners,
        arcs=arcs,
        x_marks=x_marks,
        z_marks=z_marks,
        boundary_edges=boundary_edges,
        edge_weights=dict(edge_weights or {}),
    )


def _check_standing_assumption(verts, corners, squares_set):
    """Between consecutive concave white corners (adjacent in the cyclic
    white-corner order), inside boundary black squares must be B0."""
    order = {v: i for i, v in enumerate(verts)}
    seq = sorted(
        (order[v], kind)
        for v, kind, sq in corners
        if square_color(*sq) == WHITE
    )
    if sum(1 for _, k in seq if k == "concave") < 2:
        return
    m = len(verts)
    for j in range(len(seq)):
        a, k1 = seq[j]
        b, k2 = seq[(j + 1) % len(seq)]
        if k1 != "concave" or k2 != "concave":
            continue
        i = a
        while i % m != b % m:
            p, q = verts[i % m], verts[(i + 1) % m]
            d = (q[0] - p[0], q[1] - p[1])
            sq = _LEFT_SQUARE[d](p)
            if square_color(*sq) == B1:
                raise AssumptionViolated(
                    "B1 boundary square between consecutive concave white corners"
                )
            i += 1


@dataclass
class WiredGraph:
    """Weighted graph of B0 vertices with wired arc components.

    Vertices 0..m-1 are interior (free) vertices; the rest are outer vertices
    belonging to wired arcs.  Reflecting boundary is implicit: the walk
    renormalizes over the edges present.
    """

    labels: list  # coordinate (or generic) label per vertex id
    coords: np.ndarray  # (V, 2) float embedding
    indptr: np.ndarray
    nbr: np.ndarray
    wt: np.ndarray
    m: int  # number of free vertices (ids 0..m-1)
    wired: list  # list of arrays of vertex ids, c_1..c_n
    z_idx: np.ndarray  # outer vertex id of z_i
    z_plus_idx: np.ndarray  # interior vertex id of z_i+
    index: dict = field(default_factory=dict)

    @property
    def n_vertices(self):
        return len(self.labels)

    @property
    def n_arcs(self):
        return len(self.wired)

    def arc_id(self):
        """Array mapping vertex id -> arc index, -1 for free vertices."""
        a = np.full(self.n_vertices, -1, dtype=np.int64)
        for i, arc in enumerate(self.wired):
            a[arc] = i
        return a

    def neighbors(self, v):
        s, e = self.indptr[v], self.indptr[v + 1]
        return self.nbr[s:e], self.wt[s:e]

    def edges(self):
        """Undirected edge list (u, v, w) with u < v."""
        out = []
        for u in range(self.n_vertices):
            nb, w = self.neighbors(u)
            for v, x in zip(nb, w):
                if u < v:
                    out.append((u, int(v), float(x)))
        return out


def make_wired_graph(coords, edges, wired, z_pairs=()):
    """Assemble a WiredGraph from explicit data (mainly for tests and oracles).

    coords: (V, 2) array-like; edges: (u, v) or (u, v, weight); wired: list of
    vertex-id lists; z_pairs: optional (z, z_plus) per non-root arc.  Vertex
    ids are relabeled so free vertices come first.
    """
    coords = np.asarray(coords, dtype=np.float64)
    V = len(coords)
    wired_ids = [list(map(int, arc)) for arc in wired]
    in_wired = set(v for arc in wired_ids for v in arc)
    order = [v for v in range(V) if v not in in_wired] + [
        v for arc in wired_ids for v in arc
    ]
    new = {v: i for i, v in enumerate(order)}
    m = V - len(in_wired)

    adj = [[] for _ in range(V)]
    for e in edges:
        u, v = new[int(e[0])], new[int(e[1])]
        w = float(e[2]) if len(e) > 2 else 1.0
        adj[u].append((v, w))
        adj[v].append((u, w))
    indptr = np.zeros(V + 1, dtype=np.int64)
    for i, a in enumerate(adj):
        indptr[i + 1] = indptr[i] + len(a)
    nbr = np.zeros(indptr[-1], dtype=np.int64)
    wt = np.zeros(indptr[-1], dtype=np.float64)
    for i, a in enumerate(adj):
        for k, (j, w) in enumerate(a):
            nbr[indptr[i] + k] = j
            wt[indptr[i] + k] = w
    return WiredGraph(
        labels=order,
        coords=coords[order],
        indptr=indptr,
        nbr=nbr,
        wt=wt,
        m=m,
        wired=[np.array([new[v] for v in arc], dtype=np.int64) for arc in wired_ids],
        z_idx=np.array([new[int(z)] for z, _ in z_pairs], dtype=np.int64),
        z_plus_idx=np.array([new[int(zp)] for _, zp in z_pairs], dtype=np.int64),
        index={v: new[v] for v in range(V)},
    )


def derive_tree_graph(d: MarkedDomain) -> WiredGraph:
    """The wired tree graph of the domain: interior B0 plus boundary arcs."""
    interior = d.interior_b0
    outer = [v for arc in d.arcs for v in arc]
    labels = list(interior) + list(outer)
    index = {v: i for i, v in enumerate(labels)}
    m = len(interior)
    squares = d.squares
    zset = {(z, zp) for z, zp, _ in d.z_marks}

    adj = [[] for _ in labels]

    def add(a, b):
        ia, ib = index[a], index[b]
        w = d.weight(a, b)
        adj[ia].append((ib, w))
        adj[ib].append((ia, w))

    inset = set(interior)
    outset = set(outer)
    for v in interior:
        for nb, mid in _b0_neighbors(v):
            if mid in squares:
                if nb in inset and nb > v:
                    add(v, nb)
                elif nb in outset:
                    add(v, nb)
    for z, zp, _w in d.z_marks:
        add(z, zp)
    for arc in d.arcs:
        for a, b in zip(arc, arc[1:]):
            # consecutive arc squares are usually lattice neighbors; when not,
            # they are still wired together, just without a drawn edge
            if (a[0] == b[0] or a[1] == b[1]) and abs(a[0] - b[0]) + abs(
                a[1] - b[1]
            ) == 2:
                add(a, b)

    indptr = np.zeros(len(labels) + 1, dtype=np.int64)
    for i, a in enumerate(adj):
        indptr[i + 1] = indptr[i] + len(a)
    nbr = np.zeros(indptr[-1], dtype=np.int64)
    wt = np.zeros(indptr[-1], dtype=np.float64)
    for i, a in enumerate(adj):
        for k, (j, w) in enumerate(a):
            nbr[indptr[i] + k] = j
            wt[indptr[i] + k] = w
    coords = np.array([(x + 0.5, y + 0.5) for x, y in labels], dtype=np.float64)
    wired = [np.array([index[v] for v in arc], dtype=np.int64) for arc in d.arcs]
    z_idx = np.array([index[z] for z, _, _ in d.z_marks], dtype=np.int64)
    z_plus_idx = np.array([index[zp] for _, zp, _ in d.z_marks], dtype=np.int64)
    return WiredGraph(
        labels=labels,
        coords=coords,
        indptr=indptr,
        nbr=nbr,
        wt=wt,
        m=m,
        wired=wired,
        z_idx=z_idx,
        z_plus_idx=z_plus_idx,
        index=index,
    )


@dataclass
class DimerGraph:
    """Bipartite graph of a dimer model: black vertices vs white vertices."""

    blacks: list  # labels
    whites: list
    black_coords: np.ndarray
    white_coords: np.ndarray
    adj: list  # adj[black id] = list of white ids
    weights: dict  # (black id, white id) -> weight
    black_kind: list  # 'primal' or 'dual' per black id

    @property
    def n_black(self):
        return len(self.blacks)

    @property
    def n_white(self):
        return len(self.whites)

    def weight(self, b, w):
        return self.weights.get((b, w), 1)


def dimer_graph(d: MarkedDomain) -> DimerGraph:
    """The dimer graph of a lattice domain: all squares with unit adjacency.

    A black-white edge inherits the weight of the tree-graph edge it halves
    when the black square is B0; edges at B1 squares have weight 1.
    """
    blacks = [s for s in sorted(d.squares) if d.squares[s] != WHITE]
    whites = [s for s in sorted(d.squares) if d.squares[s] == WHITE]
    bidx = {s: i for i, s in enumerate(blacks)}
    widx = {s: i for i, s in enumerate(whites)}
    adj = [[] for _ in blacks]
    weights = {}
    for (x, y) in blacks:
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb in widx:
                b, w = bidx[(x, y)], widx[nb]
                adj[b].append(w)
                if d.squares[(x, y)] == B0:
                    far = (2 * nb[0] - x, 2 * nb[1] - y)
                    wgt = d.weight((x, y), far)
                    if wgt != 1:
                        weights[(b, w)] = wgt
    bc = np.array([(x + 0.5, y + 0.5) for x, y in blacks], dtype=np.float64)
    wc = np.array([(x + 0.5, y + 0.5) for x, y in whites], dtype=np.float64)
    kind = [("primal" if d.squares[s] == B0 else "dual") for s in blacks]
    return DimerGraph(
        blacks=blacks,
        whites=whites,
        black_coords=bc,
        white_coords=wc,
        adj=adj,
        weights=weights,
        black_kind=kind,
    )


def build_superposition(vertices, edges, arcs, z_marks=()):
    """Superposition dimer graph of a planar primal graph with wired arcs.

    vertices: list of (x, y) coordinates giving the straight-line embedding.
    edges: list of (u, v) or (u, v, weight) primal edges.
    arcs: boundary arcs c_1..c_n, each a list of consecutive primal vertex ids
      along the outer boundary, the root arc last.
    z_marks: for i = 1..n-1, the endpoint z_i of arc c_i.

    Black vertices are the surviving primal vertices plus one dual vertex per
    bounded face; white vertices are the primal edges.  Arcs are removed
    (their vertices and the whites of their internal edges), and so is the
    white of each boundary edge (z_i, z_i+).
    """
    from .planar import trace_faces

    elist, wmap = [], {}
    for e in edges:
        u, v = int(e[0]), int(e[1])
        w = float(e[2]) if len(e) > 2 else 1.0
        elist.append((u, v))
        wmap[(min(u, v), max(u, v))] = w

    seen_arc = set()
    for arc in arcs:
        for v in arc:
            if v in seen_arc:
                raise ArcOverlap(f"vertex {v} lies on two arcs")
            seen_arc.add(v)

    faces, outer = trace_faces(vertices, elist, len(vertices))
    outer_darts = set(faces[outer])

    # w_i = the boundary edge leaving z_i away from its arc
    removed_whites = set()
    eset = {(min(u, v), max(u, v)) for u, v in elist}
    for i, zm in enumerate(z_marks):
        z, zp = (zm if isinstance(zm, (tuple, list)) else (zm, None))
        arc = set(arcs[i])
        if z not in arc:
            raise AssumptionViolated(f"z mark {z} not on arc {i}")
        if zp is None:
            lam_nbrs = {v for u, v in outer_darts if u == z} | {
                u for u, v in outer_darts if v == z
            }
            exits = [v for v in lam_nbrs if v not in arc]
            if len(exits) != 1:
                raise AssumptionViolated(
                    f"z mark {z} has no unique boundary exit; pass (z, z_plus)"
                )
            zp = exits[0]
        removed_whites.add((min(z, zp), max(z, zp)))
    for arc in arcs:
        for a, b in zip(arc, arc[1:]):
            key = (min(a, b), max(a, b))
            if key not in eset:
                raise AssumptionViolated(f"arc step {a}-{b} is not a primal edge")
            removed_whites.add(key)

    primal_alive = [v for v in range(len(vertices)) if v not in seen_arc]
    dual_faces = [f for i, f in enumerate(faces) if i != outer]
    blacks = [("primal", v) for v in primal_alive] + [
        ("dual", i) for i in range(len(dual_faces))
    ]
    bidx = {lab: i for i, lab in enumerate(blacks)}
    face_of_dart = {}
    for i, f in enumerate(dual_faces):
        for d in f:
            face_of_dart[d] = i

    whites = [
        (min(u, v), max(u, v))
        for u, v in elist
        if (min(u, v), max(u, v)) not in removed_whites
    ]
    widx = {e: i for i, e in enumerate(whites)}

    adj = [[] for _ in blacks]
    weights = {}
    for (u, v) in whites:
        w = widx[(u, v)]
        for p in (u, v):
            if ("primal", p) in bidx:
                b = bidx[("primal", p)]
                adj[b].append(w)
                if wmap[(u, v)] != 1:
                    weights[(b, w)] = wmap[(u, v)]
        for d in ((u, v), (v, u)):
            if d in face_of_dart:
                b = bidx[("dual", face_of_dart[d])]
                adj[b].append(w)

    bc = []
    for kind, k in blacks:
        if kind == "primal":
            bc.append(vertices[k])
        else:
            f = dual_faces[k]
            bc.append(
                (
                    sum(vertices[u][0] for u, _ in f) / len(f),
                    sum(vertices[u][1] for u, _ in f) / len(f),
                )
            )
    wc = [
        (
            (vertices[u][0] + vertices[v][0]) / 2,
            (vertices[u][1] + vertices[v][1]) / 2,
        )
        for u, v in whites
    ]
    return DimerGraph(
        blacks=blacks,
        whites=whites,
        black_coords=np.asarray(bc, dtype=np.float64),
        white_coords=np.asarray(wc, dtype=np.float64),
        adj=adj,
        weights=weights,
        black_kind=[kind for kind, _ in blacks],
    )


_SQUARE_KEYS = {"type", "boundary"}
_SUPER_KEYS = {"type", "vertices", "edges", "arcs", "z"}


def load_domain(obj):
    """Load a domain description from a JSON string, dict, or file path.

    Square-lattice domains return a MarkedDomain; superposition domains
    return the DimerGraph from build_superposition.  Unknown keys are
    rejected.
    """
    if isinstance(obj, str):
        if obj.lstrip().startswith("{"):
            obj = json.loads(obj)
        else:
            with open(obj) as f:
                obj = json.load(f)
    if not isinstance(obj, dict) or "type" not in obj:
        raise NonSimpleBoundary("domain JSON must be an object with a 'type' key")
    t = obj["type"]
    if t == "square_lattice":
        extra = set(obj) - _SQUARE_KEYS
        if extra:
            raise NonSimpleBoundary(f"unknown domain keys: {sorted(extra)}")
        return build_piecewise_temperleyan(obj["boundary"])
    if t == "superposition":
        extra = set(obj) - _SUPER_KEYS
        if extra:
            raise NonSimpleBoundary(f"unknown domain keys: {sorted(extra)}")
        edges = [(e["u"], e["v"], e.get("w", 1.0)) for e in obj["edges"]]
        return build_superposition(
            [tuple(p) for p in obj["vertices"]], edges, obj["arcs"], obj.get("z", ())
        )
    raise NonSimpleBoundary(f"unknown domain type {t!r}")
