from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toricleak.circuits import Scheme
from toricleak.graph import (
    CLASSES,
    CONDITIONAL,
    TABLE1,
    LEvent,
    build_conditional_graph,
    build_standard_graph,
    combine_probability,
    conditional_template,
    derive_weights_by_fault_enumeration,
    enumerate_single_faults,
    mask_L_syndromes,
    shortest_distance,
    standard_distance,
)
from toricleak.noise import LOUT

P = 1e-3


@pytest.mark.parametrize("scheme", list(Scheme))
@pytest.mark.parametrize("error_type", ["X", "Z"])
def test_enumeration_reproduces_weight_table(scheme, error_type):
    got = derive_weights_by_fault_enumeration(scheme, error_type=error_type)
    assert got == TABLE1[scheme]


def test_table_entries_spot_checks():
    assert TABLE1[Scheme.NO_LRU]["a"] == (Fraction(31, 15), 1)
    assert TABLE1[Scheme.PARTIAL_LRU]["d"] == (Fraction(76, 15), 0)
    assert TABLE1[Scheme.FULL_LRU]["e"][0] == 4 * TABLE1[Scheme.NO_LRU]["e"][0]


def test_measurement_flips_only_feed_class_a():
    res = enumerate_single_faults("NoLRU", "X").by_class()
    assert {c: q for c, (_, q) in res.items()} == {"a": 1, "b": 0, "c": 0, "d": 0, "e": 0, "f": 0}


def test_standard_graph_weights():
    g = build_standard_graph("NoLRU", 5, 5, P)
    w = {c: g.weight[g.cls == c][0] for c in CLASSES}
    assert np.isclose(np.exp(-w["b"]), 28 / 15 * P)
    g = build_standard_graph("FullLRU", 5, 5, P)
    assert np.isclose(np.exp(-g.weight[g.cls == "e"][0]), 32 / 15 * P)
    g = build_standard_graph("Quick", 5, 5, P, q=2e-3)
    assert np.isclose(np.exp(-g.weight[g.cls == "a"][0]), 7 / 3 * P + 2e-3)


def test_standard_graph_shape_and_connectivity():
    d, R = 5, 5
    g = build_standard_graph("NoLRU", d, R, P, error_type="Z")
    assert g.n_nodes == (R + 1) * d * d
    assert g.n_edges == 2 * d * d * (R + 1) + 4 * d * d * R
    G = nx.Graph()
    G.add_edges_from(zip(g.u.tolist(), g.v.tolist()))
    assert nx.is_connected(G) and G.number_of_nodes() == g.n_nodes
    assert (g.weight > 0).all()


@pytest.mark.parametrize("p, q", [(0, 1e-3), (0.5, 1e-3), (1e-3, 0.6), (-1, 0.1)])
def test_standard_graph_rejects_bad_probabilities(p, q):
    with pytest.raises(ValueError):
        build_standard_graph("NoLRU", 3, 3, p, q)


def test_residual_boundaries_match_edges():
    """Each edge's data-qubit effect produces exactly the spatial part of its defect pair."""
    from toricleak.lattice import build_lattice

    for et, kind in (("X", "plaquette"), ("Z", "star")):
        g = build_standard_graph("NoLRU", 5, 3, P, error_type=et)
        lat = build_lattice(5)
        for e in range(g.n_edges):
            chain = np.zeros(lat.n_data, bool)
            chain[g.residual[:, e].indices] = True
            syn = np.flatnonzero(lat.syndrome(kind, chain))
            cu, cv = g.u[e] % 25, g.v[e] % 25
            expect = sorted({int(cu), int(cv)}) if cu != cv else []
            assert syn.tolist() == expect


def test_dump_format():
    g = build_standard_graph("NoLRU", 3, 1, P)
    first = g.dump().splitlines()[0].split()
    assert len(first) == 8 and first[-1] in CLASSES
    assert [int(x) for x in first[:6]] == [0, 0, 0, 0, 0, 1]


# ---------------------------------------------------------------- masking


def _rows(*cols):
    return np.array(cols, dtype=np.uint8)[:, None]


def test_mask_single_l_no_change():
    defects, masked = mask_L_syndromes(_rows(1, LOUT, 1, 1))
    assert defects[:, 0].tolist() == [True, False, False, False]
    assert masked[:, 0].tolist() == [False, True, False, False]


def test_mask_single_l_with_change():
    defects, masked = mask_L_syndromes(_rows(0, LOUT, 1, 1))
    assert defects[:, 0].tolist() == [False, True, False, False]
    assert masked.sum() == 1


def test_mask_run_of_three():
    defects, masked = mask_L_syndromes(_rows(0, LOUT, LOUT, LOUT, 1, 1))
    assert masked.sum() == 3
    assert np.flatnonzero(defects[:, 0]).tolist() == [1]


def test_mask_rejects_l_in_final_row():
    with pytest.raises(AssertionError):
        mask_L_syndromes(_rows(0, 1, LOUT))


@given(st.lists(st.sampled_from([0, 1, LOUT]), min_size=1, max_size=12), st.integers(0, 1))
def test_mask_defect_parity(body, last):
    """Defects of a check history pair up: their count has the parity of the final outcome."""
    rows = _rows(*body, last)
    defects, masked = mask_L_syndromes(rows)
    assert defects.sum() % 2 == last
    assert masked.sum() == body.count(LOUT)


# ---------------------------------------------------------------- conditional graphs


def test_conditional_anchor_quick():
    edges = conditional_template("Quick", 5, 5, ("syndrome", 0), 3)
    first = [e for e in edges if e.i == 1 and e.error_type == "X"]
    assert len(first) == 1 and first[0].n == 11
    assert Fraction(first[0].prob).limit_denominator(1000) == Fraction(1, 22)
    std = build_standard_graph("Quick", 5, 5, P)
    g = build_conditional_graph(std, [LEvent("syndrome", 0, 3, 0)], "Quick")
    a = first[0].u[0] * 25 + first[0].u[1]
    b = first[0].v[0] * 25 + first[0].v[1]
    e = g.edge_index()[(min(a, b), max(a, b))]
    assert e >= std.n_edges  # a long edge absent from the standard graph
    assert g.cls[e] == CONDITIONAL
    assert g.prob[e] == pytest.approx(1 / 22)


def test_conditional_anchor_partial_lru():
    edges = conditional_template("PartialLRU", 5, 5, ("syndrome", 0), 3)
    third = [e for e in edges if e.i == 3 and e.error_type == "Z"]
    assert len(third) == 1 and third[0].n == 5
    assert Fraction(third[0].prob).limit_denominator(1000) == Fraction(3, 10)
    std = build_standard_graph("PartialLRU", 5, 5, P, error_type="Z")
    g = build_conditional_graph(std, [LEvent("syndrome", 0, 3, 0)], "PartialLRU")
    a = third[0].u[0] * 25 + third[0].u[1]
    b = third[0].v[0] * 25 + third[0].v[1]
    e = std.edge_index()[(min(a, b), max(a, b))]
    assert std.cls[e] == "c"  # the diagonal edge exists and is reweighted
    assert g.prob[e] == pytest.approx(combine_probability(std.prob[e], 0.3))


def test_combine_probability():
    assert combine_probability(0.0, 0.3) == 0.3
    assert combine_probability(0.1, 0.3) == pytest.approx(0.1 * 0.7 + 0.9 * 0.3)
    # independent XOR combination is order independent
    assert combine_probability(combine_probability(0.1, 0.2), 0.3) == pytest.approx(
        combine_probability(combine_probability(0.1, 0.3), 0.2))


@pytest.mark.parametrize("scheme", list(Scheme))
def test_no_events_gives_standard_graph(scheme):
    for et in ("X", "Z"):
        std = build_standard_graph(scheme, 3, 3, P, error_type=et)
        g = build_conditional_graph(std, [], scheme)
        assert g.n_edges == std.n_edges
        assert (g.weight == std.weight).all() and (g.cls == std.cls).all()
        assert (g.residual != std.residual).nnz == 0


@pytest.mark.parametrize("scheme", list(Scheme))
def test_conditional_probabilities_valid(scheme):
    std = build_standard_graph(scheme, 5, 5, P)
    ev = [LEvent("syndrome", c, t, k) for c in (0, 7) for t in (0, 2, 4) for k in (0, 1)]
    ev += [LEvent("lru", s, 1) for s in (0, 30)] if scheme in (Scheme.PARTIAL_LRU, Scheme.FULL_LRU) else []
    g = build_conditional_graph(std, ev, scheme)
    assert ((g.prob > 0) & (g.prob < 1)).all()
    assert (g.weight >= 0).all()


def test_conditional_translation():
    """An event at check c is the cell-(0,0) event shifted by c's coordinates."""
    std = build_standard_graph("Quick", 5, 5, P)
    g0 = build_conditional_graph(std, [LEvent("syndrome", 0, 2, 0)], "Quick")
    g1 = build_conditional_graph(std, [LEvent("syndrome", 7, 2, 0)], "Quick")  # (1, 2)
    def shifted(node):
        t, c = divmod(int(node), 25)
        i, j = divmod(c, 5)
        return t * 25 + ((i + 1) % 5) * 5 + (j + 2) % 5
    changed0 = {(shifted(a), shifted(b)) for a, b, p, q in zip(g0.u, g0.v, g0.prob, np.r_[std.prob, np.zeros(g0.n_edges - std.n_edges)]) if p != q}
    changed1 = {(int(a), int(b)) for a, b, p, q in zip(g1.u, g1.v, g1.prob, np.r_[std.prob, np.zeros(g1.n_edges - std.n_edges)]) if p != q}
    assert {tuple(sorted(e)) for e in changed0} == {tuple(sorted(e)) for e in changed1}


@pytest.mark.parametrize("event", [
    LEvent("syndrome", 25, 1, 0),
    LEvent("syndrome", 0, 5, 0),
    LEvent("syndrome", 0, -1, 0),
    LEvent("lru", 0, 1),
    LEvent("bogus", 0, 1),
])
def test_conditional_rejects_bad_events(event):
    std = build_standard_graph("NoLRU", 5, 5, P)
    with pytest.raises(ValueError):
        build_conditional_graph(std, [event], "NoLRU")


def test_masked_edges_zero_weight():
    std = build_standard_graph("NoLRU", 3, 3, P)
    masked = np.zeros((4, 9), bool)
    masked[1, 4] = True
    g = build_conditional_graph(std, [], "NoLRU", masked=masked)
    e = g.edge_index()[(1 * 9 + 4, 2 * 9 + 4)]
    assert g.weight[e] == 0 and (np.delete(g.weight, e) > 0).all()
    assert (std.weight > 0).all()  # the shared standard graph is untouched


# ---------------------------------------------------------------- distances


def test_distance_trivial_cases():
    g = build_standard_graph("NoLRU", 5, 5, P)
    assert shortest_distance(g, 7, 7) == (0.0, [7])
    w, path = shortest_distance(g, 0, 25)
    assert w == pytest.approx(g.weight[g.cls == "a"][0]) and path == [0, 25]


def test_cached_distance_equals_full_search():
    g = build_standard_graph("PartialLRU", 5, 5, P)
    rng = np.random.default_rng(0)
    for a, b in rng.integers(0, g.n_nodes, (100, 2)):
        assert standard_distance(g, a, b) == pytest.approx(shortest_distance(g, a, b)[0], abs=1e-12)


@given(st.integers(0, 149), st.integers(0, 149), st.integers(0, 4), st.integers(0, 4))
def test_distance_torus_symmetry(a, b, di, dj):
    g = _G
    def move(n):
        t, c = divmod(n, 25)
        i, j = divmod(c, 5)
        return t * 25 + ((i + di) % 5) * 5 + (j + dj) % 5
    assert shortest_distance(g, a, b)[0] == pytest.approx(shortest_distance(g, move(a), move(b))[0])


_G = build_standard_graph("FullLRU", 5, 5, P, error_type="Z")
