"""Winding height fields of wired spanning trees and dimer covers.

Two constructions of the same field, compared exactly in the tests:

* ``winding_field``: for each interior B0 vertex v, the cumulative turning
  angle of the curve that starts at the base boundary point of v's component
  (the counterclockwise start of the next wired arc), runs counterclockwise
  along the component wall (wired arcs and marked branches), and enters the
  interior along the reversed tree branch of v.  A global offset per
  component adds the turning of the domain boundary between the first base
  point and the component's own base point.

* ``height_function``: the standard face height function of a dimer cover on
  the lattice corner points, with flow 2*pi through each dimer against the
  uniform reference flow of mass pi/2 per lattice side (total vertex mass
  2*pi).  ``vertex_heights`` reads it back on B0 vertices; the difference to
  the winding field is constant on each connected component of the domain
  minus the marked branches.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .domains import WHITE, MarkedDomain, square_color
from .errors import (
    AssumptionViolated,
    DisconnectedVertex,
    NotInU,
    NotPerfect,
    SupportTouchesBoundary,
)
from .temperley import DimerCover

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


def _wrap(a):
    """Angle normalized to (-pi, pi]."""
    return -((-a + math.pi) % TWO_PI - math.pi)


@dataclass
class HeightField:
    """A real field in radians on lattice sites.

    values maps a site (square lower-left corner for vertex fields, lattice
    point for face fields) to a height; base_point is where the additive
    constant is anchored; reference tags the flow convention.
    """

    values: dict
    base_point: tuple
    reference: str

    def __getitem__(self, site):
        return self.values[site]

    def sites(self):
        return self.values.keys()


# ---------------------------------------------------------------------------
# dimer height function on lattice corners


def _corner_increment(squares, matched, p, mvec):
    """Height increment for the dual step p -> p + mvec, or None off-domain.

    The step crosses the side between two unit squares; the black square
    pushes mass 2*pi through its matched side and pi/2 through every side of
    the reference flow.  The increment is the net flow crossing the step,
    signed so that heights accumulate clockwise around a black square.
    """
    x, y = p
    if mvec == (1, 0):
        s1, s2 = (x, y), (x, y - 1)
    elif mvec == (-1, 0):
        s1, s2 = (x - 1, y - 1), (x - 1, y)
    elif mvec == (0, 1):
        s1, s2 = (x - 1, y), (x, y)
    else:
        s1, s2 = (x, y - 1), (x - 1, y - 1)
    if s1 not in squares and s2 not in squares:
        return None
    if square_color(*s1) == WHITE:
        blk, wht = s2, s1
    else:
        blk, wht = s1, s2
    flow = TWO_PI if (blk, wht) in matched else 0.0
    cross = (wht[0] - blk[0]) * mvec[1] - (wht[1] - blk[1]) * mvec[0]
    return (flow - HALF_PI) * (-1.0 if cross > 0 else 1.0)


def height_function(m: DimerCover, d=None) -> HeightField:
    """Dimer height function on the lattice corner points of the domain.

    Well defined for every perfect cover: the matching flow and the uniform
    reference flow have equal divergence (2*pi in and out of every square),
    so increments sum to zero around every closed dual loop.  The constant
    is fixed to zero at the lexicographically smallest corner.
    """
    if not m.is_perfect():
        raise NotPerfect("matching does not cover every square exactly once")
    dg = m.graph
    squares = set(dg.blacks) | set(dg.whites)
    matched = {(dg.blacks[b], dg.whites[w]) for b, w in m.matching}

    corners = set()
    for (x, y) in squares:
        corners.update(((x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)))

    base = min(corners)
    values = {base: 0.0}
    stack = [base]
    while stack:
        p = stack.pop()
        for mv in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            q = (p[0] + mv[0], p[1] + mv[1])
            if q not in corners:
                continue
            dh = _corner_increment(squares, matched, p, mv)
            if dh is None:
                continue
            val = values[p] + dh
            if q in values:
                if abs(values[q] - val) > 1e-9:
                    raise NotPerfect("cover induces inconsistent height increments")
            else:
                values[q] = val
                stack.append(q)
    if len(values) != len(corners):
        raise NotPerfect("corner lattice of the domain is not connected")
    return HeightField(values=values, base_point=base, reference="winding-flow")


def vertex_heights(field: HeightField, sites) -> HeightField:
    """Read a corner height field back on B0 vertices.

    For a vertex matched in direction a, the four surrounding corner heights
    are A, A + pi/2, A + pi, A + 3*pi/2 counterclockwise from the corner just
    left of a; their mean minus 3*pi/4 recovers A, the value the winding
    field assigns, without knowing the matching.
    """
    vals = {}
    for (x, y) in sites:
        cs = ((x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1))
        vals[(x, y)] = sum(field.values[c] for c in cs) / 4.0 - 3 * math.pi / 4.0
    return HeightField(values=vals, base_point=field.base_point,
                       reference=field.reference)


# ---------------------------------------------------------------------------
# winding field of a conditioned spanning tree


def _exterior_angle(d: MarkedDomain, sq):
    """Direction from an outer square's center away from the domain."""
    x, y = sq
    bedges = set(d.boundary_edges)
    bedges |= {(b, a) for a, b in bedges}
    bverts = {p for e in d.boundary_edges for p in e}
    sides = (
        ((0.0, -0.5), ((x, y), (x + 1, y))),
        ((0.0, 0.5), ((x, y + 1), (x + 1, y + 1))),
        ((-0.5, 0.0), ((x, y), (x, y + 1))),
        ((0.5, 0.0), ((x + 1, y), (x + 1, y + 1))),
    )
    ax = ay = 0.0
    hit = False
    for (ox, oy), e in sides:
        if e in bedges:
            ax += ox
            ay += oy
            hit = True
    if not hit:
        for cx, cy in ((x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)):
            if (cx, cy) in bverts:
                ax += cx - x - 0.5
                ay += cy - y - 0.5
                hit = True
    if not hit or math.hypot(ax, ay) < 1e-9:
        raise AssumptionViolated(f"no exterior direction at outer square {sq}")
    return math.atan2(-ay, -ax)


def _boundary_offsets(d: MarkedDomain):
    """Turning of the domain boundary from the first base point to each base.

    Offset j is the sum of the polygon turning angles strictly between the
    white corner opening arc c_1 and the white corner opening arc c_{j+1},
    walking counterclockwise; the corners' own turns are excluded.
    """
    verts = d.polygon
    M = len(verts)
    vert_index = {p: i for i, p in enumerate(verts)}
    turn = {}
    for i in range(M):
        u, v, w = verts[i - 1], verts[i], verts[(i + 1) % M]
        cross = (v[0] - u[0]) * (w[1] - v[1]) - (v[1] - u[1]) * (w[0] - v[0])
        turn[i] = HALF_PI * ((cross > 0) - (cross < 0))
    whites = sorted(vert_index[v] for v, _ in d.white_corners)

    edge_index = {}
    for i, p in enumerate(verts):
        edge_index[(p, verts[(i + 1) % M])] = i

    def corner_before(s):
        x, y = s
        cs = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)]
        poss = set()
        for a, b in zip(cs, cs[1:] + cs[:1]):
            if (a, b) in edge_index:
                poss.add(edge_index[(a, b)])
            if (b, a) in edge_index:
                poss.add(edge_index[(b, a)])
        if not poss:
            poss = {vert_index[c] for c in cs if c in vert_index}
        k = bisect_right(whites, min(poss)) - 1
        return whites[k % len(whites)]

    w1 = corner_before(d.arcs[0][0])
    offsets = {}
    for j in range(len(d.arcs)):
        wj = corner_before(d.arcs[j][0])
        tot = 0.0
        i = (w1 + 1) % M
        while i != wj:
            tot += turn[i]
            i = (i + 1) % M
        offsets[j] = tot
    return offsets


def _wall_contour(coords, edges):
    """Closed contour (dart list) around an embedded tree of wall edges."""
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    rot, pos = {}, {}
    for v, nbs in adj.items():
        r = sorted(nbs, key=lambda u: math.atan2(coords[u][1] - coords[v][1],
                                                 coords[u][0] - coords[v][0]))
        rot[v] = r
        pos[v] = {u: i for i, u in enumerate(r)}
    start = edges[0]
    contour = []
    a, b = start
    while True:
        contour.append((a, b))
        r = rot[b]
        a, b = b, r[(pos[b][a] - 1) % len(r)]
        if (a, b) == start:
            break
    if len(contour) != 2 * len(edges):
        raise AssumptionViolated("wall contour is not a single closed walk")
    return contour, rot


def _wall_structure(t, d: MarkedDomain):
    """Component walls of a conditioned tree.

    Returns (walls, occurrences, offsets, wall_vertices): walls[j] is the
    vertex sequence of component j's wall from its base point to the far end
    of its free arc, interior on the left; occurrences[v] lists
    (component, arrival winding, in direction, out direction) per wall pass.
    """
    g = t.graph
    cg = t.cg
    coords = g.coords
    n = g.n_arcs

    edges = set()
    wall_vertices = set()
    for arc in g.wired:
        arc = [int(v) for v in arc]
        wall_vertices.update(arc)
        for a, b in zip(arc, arc[1:]):
            edges.add((a, b))
    for i in range(n - 1):
        for j in t.branch_darts(cg.arc_vertex(i)):
            a, b = int(cg.orig_u[j]), int(cg.orig_v[j])
            edges.add((a, b))
            wall_vertices.update((a, b))

    contour, rot = _wall_contour(coords, sorted(edges))
    starts = {int(arc[0]): j for j, arc in enumerate(g.wired)}
    ends = {int(g.wired[(j - 1) % n][-1]): j for j in range(n)}
    marked = set(starts) | set(ends)
    ext = {v: _exterior_angle(d, g.labels[v]) for v in marked}

    cuts = []
    nc = len(contour)
    for i in range(nc):
        u, v = contour[i]
        if v not in marked:
            continue
        w = contour[(i + 1) % nc][1]
        a1 = math.atan2(*(coords[u] - coords[v])[::-1])
        a2 = math.atan2(*(coords[w] - coords[v])[::-1])
        # the visit sweeps clockwise from the arrival edge to the departure
        # edge; cut where the sweep contains the exterior direction
        if len(rot[v]) == 1 or (a1 - ext[v]) % TWO_PI <= (a1 - a2) % TWO_PI + 1e-12:
            cuts.append((i, v))

    walls = {}
    for k in range(len(cuts)):
        i0, v0 = cuts[k]
        i1, _ = cuts[(k + 1) % len(cuts)]
        if v0 not in starts:
            continue
        j = starts[v0]
        walls[j] = [v0] + [contour[(i0 + 1 + q) % nc][1]
                           for q in range((i1 - i0) % nc)]
    if len(walls) != n or any(
        ends.get(verts[-1]) != j for j, verts in walls.items()
    ):
        raise AssumptionViolated("wall contour does not split at the arc ends")

    offsets = _boundary_offsets(d)
    occ = {}
    for j, verts in walls.items():
        angs = [math.atan2(*(coords[verts[k + 1]] - coords[verts[k]])[::-1])
                for k in range(len(verts) - 1)]
        cum = 0.0
        for k, v in enumerate(verts):
            if k >= 2:
                cum += _wrap(angs[k - 1] - angs[k - 2])
            a_in = angs[k - 1] if k > 0 else angs[0]
            a_out = angs[k] if k < len(angs) else angs[-1]
            occ.setdefault(v, []).append((j, offsets[j] + cum, a_in, a_out, k))
    return walls, occ, offsets, wall_vertices


def _solve_field(t, d: MarkedDomain):
    """Winding values and component labels for every free vertex."""
    g = t.graph
    cg = t.cg
    coords = g.coords
    if not t.in_conditioned_class():
        raise NotInU("a marked arc does not exit through its z-edge")
    walls, occ, _, wall_vertices = _wall_structure(t, d)

    def direction(a, b):
        return math.atan2(coords[b][1] - coords[a][1], coords[b][0] - coords[a][0])

    h = {}
    comp = {}

    def anchor(v, p):
        """Value of v attaching to wall vertex p, via the matching wall pass."""
        d_att = direction(p, v)
        hits = []
        for (j, cum, a_in, a_out, _k) in occ[p]:
            lo = (d_att - a_out) % TWO_PI
            hi = ((a_in + math.pi) - a_out) % TWO_PI
            if hi <= 1e-12:
                hi = TWO_PI
            if 1e-9 < lo < hi - 1e-9:
                hits.append((j, cum + _wrap(d_att - a_in)))
        if len(hits) != 1:
            raise AssumptionViolated(
                f"branch attaches ambiguously to the wall at vertex {p}"
            )
        return hits[0]

    def extend(v, p):
        """Value of v from its already-solved interior parent p."""
        pp = int(cg.orig_v[int(t.nxt[p])])
        turn = _wrap(direction(p, v) - direction(pp, p))
        return comp[p], h[p] + turn

    for v0 in range(g.m):
        if v0 in h or v0 in wall_vertices:
            continue
        chain = []
        v = v0
        seen = set()
        while v not in h and v not in wall_vertices:
            if int(t.nxt[v]) < 0 or v in seen:
                raise DisconnectedVertex(f"vertex {v} has no branch to the wall")
            seen.add(v)
            chain.append(v)
            v = int(cg.orig_v[int(t.nxt[v])])
        for u in reversed(chain):
            p = int(cg.orig_v[int(t.nxt[u])])
            comp[u], h[u] = anchor(u, p) if p in wall_vertices else extend(u, p)

    # free vertices on marked branches take the wall value of the pass that
    # arrives from their tree parent: the same root-outward orientation the
    # interior recursion uses
    for v in wall_vertices:
        if v >= g.m or v in h:
            continue
        p = int(cg.orig_v[int(t.nxt[v])])
        for (j, cum, _a_in, _a_out, k) in occ[v]:
            if k >= 1 and walls[j][k - 1] == p:
                comp[v], h[v] = j, cum
                break
        else:
            raise AssumptionViolated(f"branch vertex {v} has no parent wall pass")
    return h, comp


def winding_field(t, d: MarkedDomain) -> HeightField:
    """Winding height field of a conditioned spanning tree on the B0 vertices.

    The value at v is the total turning of the curve from the base point of
    v's component to v (wall counterclockwise, then the reversed tree
    branch), plus the boundary turning offset of the component; increments
    between tree neighbors are multiples of pi/2 on the square lattice.
    """
    g = t.graph
    h, _ = _solve_field(t, d)
    values = {tuple(g.labels[v]): val for v, val in h.items()}
    return HeightField(values=values, base_point=tuple(d.x_marks[1]),
                       reference="branch-winding")


def winding_components(t, d: MarkedDomain) -> dict:
    """Component index (by free boundary arc) of each free B0 vertex.

    Vertices on marked branches are labeled by the component on the forward
    side of their branch.
    """
    g = t.graph
    _, comp = _solve_field(t, d)
    return {tuple(g.labels[v]): j for v, j in comp.items()}


# ---------------------------------------------------------------------------
# pairing against test functions


def pair_with_test_function(f, field: HeightField, d: MarkedDomain = None,
                            spacing=1.0) -> float:
    """Riemann-sum pairing spacing^2 * sum_v h(v) f(v) over the field sites.

    f is evaluated at square centers for vertex fields (lower-left keys) and
    at the points themselves for corner fields.  When a domain is given, f
    must vanish on vertices within one B0 step of the wired or reflecting
    boundary.
    """
    vertex_keyed = field.reference != "winding-flow"
    if d is not None and vertex_keyed:
        interior = set(d.interior_b0)
        squares = d.squares
        for (x, y) in field.sites():
            if abs(f(x + 0.5, y + 0.5)) <= 0.0:
                continue
            for nb, mid in (((x + 2, y), (x + 1, y)), ((x - 2, y), (x - 1, y)),
                            ((x, y + 2), (x, y + 1)), ((x, y - 2), (x, y - 1))):
                if mid not in squares or nb not in interior:
                    raise SupportTouchesBoundary(
                        f"test function is nonzero at boundary vertex {(x, y)}"
                    )
    total = 0.0
    for site, val in field.values.items():
        x, y = site
        fx = f(x + 0.5, y + 0.5) if vertex_keyed else f(float(x), float(y))
        total += val * fx
    return spacing * spacing * total
