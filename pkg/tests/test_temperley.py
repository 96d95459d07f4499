"""Dimer cover <-> wired spanning tree bijection."""

import pytest

from dimertree import build_piecewise_temperleyan, derive_tree_graph, dimer_graph
from dimertree.errors import EnumerationBudgetExceeded, NotInU, NotPerfect
from dimertree.temperley import (
    DimerCover,
    dimers_to_tree,
    enumerate_admissible_trees,
    enumerate_covers,
    tree_to_dimers,
    tree_weight,
    verify_bijection,
)
from dimertree.wilson import sample_conditioned

L44 = [(0, 0), (4, 0), (4, 4), (2, 4), (2, 2), (0, 2)]
L66 = [(0, 0), (6, 0), (6, 6), (2, 6), (2, 4), (0, 4)]
L46 = [(0, 0), (4, 0), (4, 6), (2, 6), (2, 2), (0, 2)]
MID64 = [(0, 0), (6, 0), (6, 4), (4, 4), (4, 2), (2, 2), (2, 4), (0, 4)]


def test_l44_exhaustive():
    rep = verify_bijection(build_piecewise_temperleyan(L44))
    assert rep["covers"] == rep["trees"] == 12
    assert rep["injective"] and rep["surjective"]
    assert rep["roundtrip"] and rep["measure_preserving"]


@pytest.mark.parametrize(
    "poly,count", [(L66, 2088), (L46, 31), (MID64, 74)]
)
def test_exhaustive_fixtures(poly, count):
    rep = verify_bijection(build_piecewise_temperleyan(poly))
    assert rep["covers"] == rep["trees"] == count
    assert all(rep[k] for k in
               ("injective", "surjective", "roundtrip", "measure_preserving"))


def test_weighted_instance_preserves_measure():
    d = build_piecewise_temperleyan(L44)
    d.edge_weights[((0, 0), (2, 0))] = 2
    rep = verify_bijection(d)
    assert rep["measure_preserving"]
    dg = dimer_graph(d)
    weights = sorted(m.weight() for m in enumerate_covers(dg))
    assert 2.0 in weights and 1.0 in weights


def test_roundtrip_on_sampled_trees():
    d = build_piecewise_temperleyan(L66)
    g = derive_tree_graph(d)
    for seed in range(25):
        t = sample_conditioned(g, seed)
        m = tree_to_dimers(t, d)
        assert m.is_perfect()
        t2 = dimers_to_tree(m, d)
        assert list(t2.nxt) == list(t.nxt)
        assert tree_weight(t2) == tree_weight(t)


def test_not_perfect_rejected():
    d = build_piecewise_temperleyan(L44)
    dg = dimer_graph(d)
    m = enumerate_covers(dg)[0]
    broken = DimerCover(dg, frozenset(list(m.matching)[1:]))
    with pytest.raises(NotPerfect):
        dimers_to_tree(broken, d)


def test_malformed_tree_rejected():
    d = build_piecewise_temperleyan(L44)
    g = derive_tree_graph(d)
    t = sample_conditioned(g, 0)
    bad = t.nxt.copy()
    bad[0] = -1  # orphan a free vertex
    from dimertree.wilson import SpanningTree

    with pytest.raises(NotInU):
        tree_to_dimers(SpanningTree(t.cg, bad, t.roots), d)
    # breaking the z-edge condition is also rejected
    cg = t.cg
    u = cg.arc_vertex(0)
    for j in range(cg.indptr[u], cg.indptr[u + 1]):
        if j != cg.z_darts[0]:
            bad2 = t.nxt.copy()
            bad2[u] = j
            with pytest.raises(NotInU):
                tree_to_dimers(SpanningTree(cg, bad2, t.roots), d)
            break


def test_enumeration_budget():
    d = build_piecewise_temperleyan(L66)
    with pytest.raises(EnumerationBudgetExceeded):
        verify_bijection(d, budget=10)
    with pytest.raises(EnumerationBudgetExceeded):
        verify_bijection(d, budget=0)


def test_sampled_trees_are_admissible():
    d = build_piecewise_temperleyan(L44)
    g = derive_tree_graph(d)
    keys = {tuple(int(j) for j in t.nxt) for t in enumerate_admissible_trees(g)}
    for seed in range(30):
        t = sample_conditioned(g, seed)
        assert tuple(int(j) for j in t.nxt) in keys
