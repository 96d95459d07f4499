"""Exact counting oracles: Kasteleyn, matrix-tree, branch conditioning."""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimertree import build_piecewise_temperleyan, derive_tree_graph, dimer_graph
from dimertree.domains import DimerGraph, make_wired_graph
from dimertree.errors import (
    DisconnectedGraph,
    NonSquare,
    PathNotSimple,
    SingularSystem,
    UnbalancedBipartition,
)
from dimertree.exact_count import (
    ExactMatrix,
    det_expansion_check,
    exact_det,
    exact_hitting,
    exact_solve,
    fomin_rn,
    hitting_matrix,
    kasteleyn_count,
    prob_event_estar,
    tree_count,
)
from dimertree.harmonic import hitting_prob_arc
from dimertree.temperley import enumerate_covers

L44 = [(0, 0), (4, 0), (4, 4), (2, 4), (2, 2), (0, 2)]
L66 = [(0, 0), (6, 0), (6, 6), (2, 6), (2, 4), (0, 4)]
L46 = [(0, 0), (4, 0), (4, 6), (2, 6), (2, 2), (0, 2)]
MID64 = [(0, 0), (6, 0), (6, 4), (4, 4), (4, 2), (2, 2), (2, 4), (0, 4)]
# 6x4 rectangle minus a 3x2 notch: the smallest three-arc fixture.
N3S = [(0, 0), (2, 0), (2, 2), (5, 2), (5, 0), (6, 0), (6, 4), (0, 4)]
# 10x4 rectangle minus two 3x2 notches: five arcs, 4x4 event matrix.
N5 = [(0, 0), (2, 0), (2, 2), (5, 2), (5, 0), (6, 0),
      (6, 2), (9, 2), (9, 0), (10, 0), (10, 4), (0, 4)]

# (polygon, #dimer covers, #trees with all arcs joined)
FIXTURES = [
    (L44, 12, 18),
    (L66, 2088, 3364),
    (L46, 31, 49),
    (MID64, 74, 112),
    (N3S, 31, 67),
    (N5, 212, 933),
]


# ---------------------------------------------------------------------------
# exact linear algebra


def test_exact_det_examples():
    assert exact_det([[Fraction(1), Fraction(2)], [Fraction(3), Fraction(4)]]) == -2
    assert exact_det([[1, 2], [2, 4]]) == 0
    assert exact_det([]) == 1
    m = ExactMatrix([[Fraction(2), 0], [0, Fraction(1, 2)]])
    assert m.det() == 1
    with pytest.raises(NonSquare):
        ExactMatrix([[1, 2], [3, 4], [5, 6]]).det()
    with pytest.raises(NonSquare):
        ExactMatrix([[1, 2], [3]])


def test_exact_solve():
    x = exact_solve([[2, 1], [1, 3]], [5, 10])
    assert x == [Fraction(1), Fraction(3)]
    with pytest.raises(SingularSystem):
        exact_solve([[1, 2], [2, 4]], [1, 1])


# ---------------------------------------------------------------------------
# Kasteleyn counting


def grid_dimer_graph(p, q):
    """Dimer graph of the p x q grid graph, colored by parity."""
    verts = [(x, y) for x in range(p) for y in range(q)]
    blacks = [v for v in verts if (v[0] + v[1]) % 2 == 0]
    whites = [v for v in verts if (v[0] + v[1]) % 2 == 1]
    widx = {v: i for i, v in enumerate(whites)}
    adj = []
    for (x, y) in blacks:
        adj.append(
            [widx[n] for n in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
             if n in widx]
        )
    return DimerGraph(
        blacks,
        whites,
        np.array(blacks, dtype=float),
        np.array(whites, dtype=float),
        adj,
        {},
        ["primal"] * len(blacks),
    )


@pytest.mark.parametrize("p,q,count", [(2, 2, 2), (2, 3, 3), (4, 4, 36)])
def test_kasteleyn_grid_examples(p, q, count):
    dg = grid_dimer_graph(p, q)
    assert kasteleyn_count(dg) == count
    assert len(enumerate_covers(dg)) == count


def test_kasteleyn_unbalanced():
    with pytest.raises(UnbalancedBipartition):
        kasteleyn_count(grid_dimer_graph(3, 3))


def test_kasteleyn_weighted():
    dg = grid_dimer_graph(2, 2)  # 4-cycle; matchings have weights w and 1
    dg.weights[(0, 0)] = 3
    total = kasteleyn_count(dg)
    assert total == sum(Fraction(m.weight()) for m in enumerate_covers(dg))


@pytest.mark.parametrize("poly,covers,_", FIXTURES)
def test_kasteleyn_matches_cover_counts(poly, covers, _):
    d = build_piecewise_temperleyan(poly)
    assert kasteleyn_count(dimer_graph(d)) == covers


# ---------------------------------------------------------------------------
# matrix-tree counts


def grid_wired_graph(p, q, wired):
    verts = [(x, y) for x in range(p) for y in range(q)]
    idx = {v: i for i, v in enumerate(verts)}
    edges = []
    for (x, y) in verts:
        for n in ((x + 1, y), (x, y + 1)):
            if n in idx:
                edges.append((idx[(x, y)], idx[n], 1.0))
    coords = np.array(verts, dtype=float)
    return make_wired_graph(coords, edges, [[idx[v] for v in arc] for arc in wired])


def test_tree_count_2x3_grid():
    g = grid_wired_graph(2, 3, [[(0, 0)]])
    assert tree_count(g, "ST") == 15


def test_tree_count_sf2_single_edge():
    g = make_wired_graph(
        np.array([[0.0, 0.0], [1.0, 0.0]]), [(0, 1, 1.0)], [[0], [1]]
    )
    assert tree_count(g, "SF2") == 1  # only the empty forest separates them
    assert tree_count(g, "ST") == 1  # the one spanning tree uses the edge


def test_tree_count_disconnected():
    g = make_wired_graph(
        np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]),
        [(0, 1, 1.0)],
        [[0]],
    )
    with pytest.raises(DisconnectedGraph):
        tree_count(g, "ST")


def test_tree_count_unknown_mode():
    g = grid_wired_graph(2, 2, [[(0, 0)]])
    with pytest.raises(ValueError):
        tree_count(g, "SF3")


# ---------------------------------------------------------------------------
# the first-step event


@pytest.mark.parametrize("poly,covers,joined", FIXTURES)
def test_event_probability_times_tree_count(poly, covers, joined):
    d = build_piecewise_temperleyan(poly)
    g = derive_tree_graph(d)
    assert tree_count(g, "ST-joined") == joined
    p = prob_event_estar(d)
    assert p == Fraction(covers, joined)


def test_prob_estar_two_arcs_reduces_to_one_minus_h():
    d = build_piecewise_temperleyan(L44)
    g = derive_tree_graph(d)
    H = hitting_matrix(g)
    assert H.shape == (1, 1)
    assert prob_event_estar(d) == 1 - H.entries[0][0]


def test_hitting_matrix_matches_float_solver():
    d = build_piecewise_temperleyan(N3S)
    g = derive_tree_graph(d)
    H = hitting_matrix(g)
    for i in range(2):
        for j in range(2):
            ref = hitting_prob_arc(g, int(g.z_plus_idx[i]), j)
            assert abs(float(H.entries[i][j]) - ref) < 1e-10


def test_exact_hitting_alias_slides_to_tip():
    # aliased vertices carry the tip's value and drop out of the system
    d = build_piecewise_temperleyan(N3S)
    g = derive_tree_graph(d)
    dirichlet = {int(v): Fraction(a == 0) for a, arc in enumerate(g.wired)
                 for v in arc}
    tip = 1
    field = exact_hitting(g, dirichlet, alias={2: tip})
    assert field[2] == field[tip]
    # from the tip the walk can no longer reach the first arc's z-mark side
    assert field[tip] == Fraction(1, 3)


# ---------------------------------------------------------------------------
# the branch Radon-Nikodym derivative, against exhaustive enumeration


def _all_trees(g):
    """All spanning trees of the fully wired graph as out-dart choices."""
    m = g.m
    darts = []
    for u in range(m):
        nb, _ = g.neighbors(u)
        darts.append([(int(v) if int(v) < m else m, int(v)) for v in nb])
    trees = []
    for combo in itertools.product(*[range(len(x)) for x in darts]):
        ok = True
        state = [0] * m
        for s in range(m):
            path = []
            v = s
            while v < m and state[v] == 0:
                state[v] = 1
                path.append(v)
                v = darts[v][combo[v]][0]
            if v < m and state[v] == 1:
                ok = False
                break
            for u in path:
                state[u] = 2
        if ok:
            trees.append(combo)
    return darts, trees


def _tree_stats(g, darts, combo):
    """(exit arc of each marked vertex's component, branch from z_1+)."""
    m = g.m
    arc_of = g.arc_id()
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u in range(m):
        t, _ = darts[u][combo[u]]
        if t < m:
            parent[find(u)] = find(t)
    exit_arc = {}
    for u in range(m):
        t, ov = darts[u][combo[u]]
        if t == m:
            exit_arc[find(u)] = int(arc_of[ov])
    marks = [int(x) for x in g.z_plus_idx]
    exits = [exit_arc[find(z)] for z in marks]
    seq = [marks[0]]
    v = marks[0]
    while True:
        t, _ = darts[v][combo[v]]
        if t == m:
            break
        seq.append(t)
        v = t
    return exits, seq


def _no_cycle_pattern(exits, n):
    for s in range(1, n):
        for cyc in itertools.permutations(range(n - 1), s):
            if all(exits[cyc[k]] == cyc[(k + 1) % s] for k in range(s)):
                return False
    return True


def _enumerated_rn(d, weight_edge=None):
    """Map eta -> exact conditioned-law ratio, by exhaustive enumeration."""
    if weight_edge:
        d.edge_weights[weight_edge[0]] = weight_edge[1]
    g = derive_tree_graph(d)
    n = g.n_arcs
    darts, trees = _all_trees(g)

    def tree_w(combo):
        p = Fraction(1)
        for u in range(g.m):
            nb, wt = g.neighbors(u)
            p *= Fraction(float(wt[combo[u]])).limit_denominator(10**9)
        return p

    stats = [(_tree_stats(g, darts, c), tree_w(c)) for c in trees]
    e_tot = sum(w for (ex, _), w in stats if _no_cycle_pattern(ex, n))
    t_tot = sum(w for (ex, _), w in stats if ex[0] != 0)
    adj = {u: [t for t, _ in darts[u] if t < g.m] for u in range(g.m)}
    out = {}

    def grow(p):
        k = len(p)
        num = sum(w for (ex, b), w in stats
                  if _no_cycle_pattern(ex, n) and b[:k] == p)
        den = sum(w for (ex, b), w in stats if ex[0] != 0 and b[:k] == p)
        out[tuple(p)] = (
            (num / e_tot) / (den / t_tot) if den else None,
            num,
        )
        for v in adj[p[-1]]:
            if v not in p:
                p.append(v)
                grow(p)
                p.pop()

    grow([int(g.z_plus_idx[0])])
    return d, out


@pytest.mark.parametrize("poly", [L44, L46, MID64, N3S, N5])
def test_fomin_rn_matches_enumerated_ratios(poly):
    d, ratios = _enumerated_rn(build_piecewise_temperleyan(poly))
    assert len(ratios) >= 3
    for eta, (ratio, num) in ratios.items():
        if ratio is None:
            assert num == 0  # both conditioned events are null
        else:
            assert fomin_rn(d, list(eta)) == ratio


def test_fomin_rn_matches_enumerated_ratios_weighted():
    d, ratios = _enumerated_rn(
        build_piecewise_temperleyan(N3S), (((0, 0), (0, 2)), 3)
    )
    nontrivial = [r for r, _ in ratios.values() if r not in (None, 1)]
    assert nontrivial
    for eta, (ratio, _) in ratios.items():
        if ratio is not None:
            assert fomin_rn(d, list(eta)) == ratio


def test_fomin_rn_two_arcs_is_identity():
    # with a single marked pair the two conditionings coincide
    d = build_piecewise_temperleyan(L66)
    g = derive_tree_graph(d)
    z = int(g.z_plus_idx[0])
    nb, _ = g.neighbors(z)
    step = [int(v) for v in nb if int(v) < g.m][0]
    assert fomin_rn(d, [z, step]) == 1


def test_fomin_rn_trivial_and_zero():
    d = build_piecewise_temperleyan(N3S)
    assert fomin_rn(d, None) == 1
    assert fomin_rn(d, []) == 1
    assert fomin_rn(d, [2]) == 1
    # tip boxed in by its own past: the continuation must hit the first arc
    assert fomin_rn(d, [2, 1, 0]) == 0


def test_fomin_rn_rejects_bad_paths():
    d = build_piecewise_temperleyan(N3S)
    with pytest.raises(PathNotSimple):
        fomin_rn(d, [2, 1, 2])  # repeated vertex
    with pytest.raises(PathNotSimple):
        fomin_rn(d, [1, 0])  # wrong start
    with pytest.raises(PathNotSimple):
        fomin_rn(d, [2, 0])  # not adjacent
    g = derive_tree_graph(d)
    with pytest.raises(PathNotSimple):
        fomin_rn(d, [2, g.m])  # wired vertex


# ---------------------------------------------------------------------------
# determinant expansion identity


def test_det_expansion_trivial():
    zero = ExactMatrix([[Fraction(0)] * 3 for _ in range(3)])
    assert det_expansion_check(zero, 7)
    eye = ExactMatrix(
        [[Fraction(1 if i == j else 0) for j in range(4)] for i in range(4)]
    )
    assert det_expansion_check(eye, 1)
    with pytest.raises(NonSquare):
        det_expansion_check(ExactMatrix([[1, 2, 3], [4, 5, 6]]), 1)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.fractions(min_value=-3, max_value=3, max_denominator=7),
        min_size=16,
        max_size=16,
    ),
    st.fractions(min_value=-2, max_value=2, max_denominator=5),
)
def test_det_expansion_random(entries, r):
    rows = [entries[4 * i : 4 * i + 4] for i in range(4)]
    assert det_expansion_check(ExactMatrix(rows), r)
