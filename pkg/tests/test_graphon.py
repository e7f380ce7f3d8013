import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphldp.graphon import (FiniteGraph, Motif, RefinementOverflow, StepGraphon, StepKernel, common_refinement,
                              cut_distance, cut_norm, cut_norm_search, edge_density, embed, hom_count,
                              l1_distance, t_density, t_density_graph, t_gradient)
from graphldp.verify import brute_cut_norm, finite_difference, max_rel_error

TRI = Motif.preset("triangle")
EDGE = Motif.preset("edge")
C4 = Motif.preset("c4")
CHECKER = StepGraphon.uniform_blocks([[1.0, 0.0], [0.0, 1.0]])


def random_graphon(rng, k):
    w = rng.random(k) + 0.2
    v = rng.random((k, k))
    return StepGraphon(w / w.sum(), np.triu(v) + np.triu(v, 1).T)


def brute_hom(h: Motif, g: FiniteGraph) -> int:
    a = g.adjacency
    return sum(all(a[phi[u], phi[v]] for u, v in h.edges)
               for phi in itertools.product(range(g.n), repeat=h.k))


# -- types ---------------------------------------------------------------------


def test_stepgraphon_validation():
    with pytest.raises(ValueError):
        StepGraphon([0.5, 0.5], [[0.0, 1.0], [0.5, 0.0]])  # asymmetric
    with pytest.raises(ValueError):
        StepGraphon([0.5, 0.5], [[0.0, 1.5], [1.5, 0.0]])  # out of range
    with pytest.raises(ValueError):
        StepGraphon([0.5, 0.6], [[0.0, 1.0], [1.0, 0.0]])  # weights do not sum to 1
    with pytest.raises(ValueError):
        StepGraphon([1.0, 0.0], [[0.0, 1.0], [1.0, 0.0]])  # zero-measure block


def test_stepgraphon_json_roundtrip():
    w = random_graphon(np.random.default_rng(0), 4)
    back = StepGraphon.from_json(w.to_json())
    assert np.array_equal(back.values, w.values) and np.array_equal(back.weights, w.weights)


def test_merge_and_refine_preserve_densities():
    w = random_graphon(np.random.default_rng(1), 3)
    fine = w.refined(3)
    assert fine.k == 9
    assert math.isclose(t_density(TRI, fine), t_density(TRI, w), rel_tol=1e-12)
    merged = fine.merged()
    assert merged.k == 3
    assert math.isclose(t_density(C4, merged), t_density(C4, w), rel_tol=1e-12)


def test_finite_graph_normalises_and_rejects_loops():
    g = FiniteGraph(3, frozenset({(1, 0), (2, 1)}))
    assert g.edges == {(0, 1), (1, 2)}
    with pytest.raises(ValueError):
        FiniteGraph(3, frozenset({(1, 1)}))
    with pytest.raises(ValueError):
        FiniteGraph(3, frozenset({(0, 3)}))


def test_edgelist_roundtrip_and_comments():
    g = FiniteGraph(5, frozenset({(0, 1), (3, 4), (1, 4)}))
    text = g.to_edgelist()
    assert text.splitlines()[0] == "5 3"
    assert FiniteGraph.from_edgelist("# a comment\n" + text) == g
    with pytest.raises(ValueError):
        FiniteGraph.from_edgelist("5 4\n0 1\n")


def test_motif_parsing():
    assert Motif.parse("triangle") == TRI
    m = Motif.parse("0-1,1-2,2-0")
    assert m.k == 3 and m.kappa == 3
    with pytest.raises(ValueError):
        Motif.parse("nonsense")
    with pytest.raises(ValueError):
        Motif(3, ((0, 1), (1, 0)))


# -- embedding and densities ----------------------------------------------------


def test_embed_examples():
    assert np.array_equal(embed(FiniteGraph(3)).values, np.zeros((3, 3)))
    w = embed(FiniteGraph(2, frozenset({(0, 1)})))
    assert np.array_equal(w.values, [[0, 1], [1, 0]]) and np.array_equal(w.weights, [0.5, 0.5])
    k4 = embed(FiniteGraph.complete(4))
    assert np.all(np.diag(k4.values) == 0) and edge_density(k4) == 0.75


def test_edge_density_examples():
    assert math.isclose(edge_density(StepGraphon.constant(0.3)), 0.3)
    assert edge_density(CHECKER) == 0.5


def test_t_density_examples():
    for p in (0.0, 0.3, 0.5, 1.0):
        assert math.isclose(t_density(TRI, StepGraphon.constant(p, 3)), p**3, abs_tol=1e-15)
    assert t_density(TRI, CHECKER) == 0.25
    w = random_graphon(np.random.default_rng(2), 5)
    assert math.isclose(t_density(EDGE, w), edge_density(w), rel_tol=1e-13)


def test_t_density_matches_direct_integration():
    # independent oracle: sum over block maps written out with explicit loops
    rng = np.random.default_rng(3)
    w = random_graphon(rng, 3)
    total = 0.0
    for a, b, c in itertools.product(range(3), repeat=3):
        total += (w.values[a, b] * w.values[b, c] * w.values[a, c]
                  * w.weights[a] * w.weights[b] * w.weights[c])
    assert math.isclose(t_density(TRI, w), total, rel_tol=1e-13)


def test_t_density_graph_examples():
    k3 = FiniteGraph.complete(3)
    assert hom_count(TRI, k3) == 6 and t_density_graph(TRI, k3) == 6 / 27
    assert t_density_graph(TRI, FiniteGraph(5)) == 0
    g = FiniteGraph(6, frozenset({(0, 1), (2, 3), (1, 5), (4, 5)}))
    assert t_density_graph(EDGE, g) == 2 * 4 / 36


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 2**31 - 1),
       motif=st.sampled_from(["edge", "triangle", "c4", "path2", "k4"]))
def test_hom_count_matches_brute_force(n, seed, motif):
    rng = np.random.default_rng(seed)
    a = np.triu(rng.random((n, n)) < 0.5, 1)
    g = FiniteGraph.from_adjacency(a | a.T)
    h = Motif.preset(motif)
    if n ** h.k > 5000:
        return
    assert hom_count(h, g) == brute_hom(h, g)


def test_t_density_embed_equals_graph_exactly():
    rng = np.random.default_rng(4)
    motifs = [EDGE, TRI, C4, Motif.preset("path2"), Motif.preset("k4"), Motif.parse("0-1,2-3")]
    for _ in range(40):
        n = int(rng.integers(1, 13))
        a = np.triu(rng.random((n, n)) < rng.random(), 1)
        g = FiniteGraph.from_adjacency(a | a.T)
        for h in motifs:
            assert t_density(h, embed(g)) == t_density_graph(h, g)


# -- gradient -------------------------------------------------------------------


def test_t_gradient_closed_forms():
    w = random_graphon(np.random.default_rng(5), 4)
    expected = np.outer(w.weights, w.weights) * (2 - np.eye(4))
    assert np.allclose(t_gradient(EDGE, w), expected, rtol=1e-13)
    for p in (0.2, 0.7):
        assert math.isclose(t_gradient(TRI, StepGraphon.constant(p))[0, 0], 3 * p**2, rel_tol=1e-13)


def test_t_gradient_finite_differences():
    rng = np.random.default_rng(6)
    w = random_graphon(rng, 3)
    assert max_rel_error(t_gradient(TRI, w), finite_difference(TRI, w)) < 1e-6
    for _ in range(30):
        h = [EDGE, TRI, C4][int(rng.integers(0, 3))]
        w = random_graphon(rng, int(rng.integers(1, 7)))
        assert max_rel_error(t_gradient(h, w), finite_difference(h, w)) < 1e-4


# -- norms and distances ----------------------------------------------------------


def test_cut_norm_examples():
    assert math.isclose(cut_norm(StepKernel([1.0], [[-0.4]])), 0.4)
    diff = StepKernel([0.5, 0.5], [[0.5, -0.5], [-0.5, 0.5]])
    assert math.isclose(cut_norm(diff), 1 / 8)
    assert cut_norm(StepKernel([0.25] * 4, np.zeros((4, 4)))) == 0.0


def test_cut_norm_against_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(200):
        k = int(rng.integers(1, 7))
        w = rng.random(k) + 0.2
        v = rng.uniform(-1, 1, (k, k))
        kern = StepKernel(w / w.sum(), np.triu(v) + np.triu(v, 1).T)
        oracle = brute_cut_norm(kern)
        res = cut_norm_search(kern)
        assert res.exact and abs(res.value - oracle) < 1e-12
        # the witness sets realise the value
        m = kern.values * np.outer(kern.weights, kern.weights)
        assert math.isclose(abs(res.rows.astype(float) @ m @ res.cols.astype(float)), res.value, abs_tol=1e-12)
        heur = cut_norm_search(kern, k_exact=0, restarts=3)
        assert not heur.exact and heur.value <= oracle + 1e-12
        zero = StepKernel(kern.weights, np.zeros((k, k)))
        assert res.value <= l1_distance(kern, zero) + 1e-12


def test_cut_norm_hard_cap():
    big = StepKernel(np.full(70, 1 / 70), np.zeros((70, 70)))
    with pytest.raises(ValueError):
        cut_norm(big)


def test_l1_distance_examples():
    w = random_graphon(np.random.default_rng(8), 3)
    assert l1_distance(w, w) == 0.0
    assert math.isclose(l1_distance(StepGraphon.constant(0.2), StepGraphon.constant(0.5, 3)), 0.3)
    assert math.isclose(l1_distance(CHECKER, StepGraphon.constant(0.5)), 0.5)


def test_common_refinement_widths():
    widths, i1, i2 = common_refinement(np.array([0.5, 0.5]), np.array([0.25, 0.75]))
    assert np.allclose(widths, [0.25, 0.25, 0.5])
    assert list(i1) == [0, 0, 1] and list(i2) == [0, 1, 1]


def test_cut_distance_examples():
    rng = np.random.default_rng(9)
    w = random_graphon(rng, 4)
    w = StepGraphon.uniform_blocks(w.values)
    assert cut_distance(w, w).value == 0.0
    assert cut_distance(w, w.permuted([2, 0, 3, 1])).value < 1e-15
    res = cut_distance(StepGraphon.constant(0.2), StepGraphon.constant(0.5))
    assert math.isclose(res.value, 0.3) and res.exact


def test_cut_distance_mixed_block_measures():
    a = StepGraphon([0.25, 0.75], [[1.0, 0.2], [0.2, 0.4]])
    b = StepGraphon([0.75, 0.25], [[0.4, 0.2], [0.2, 1.0]])
    assert cut_distance(a, b).value < 1e-15


def test_cut_distance_overflow():
    a = StepGraphon([1 / 3, 2 / 3], [[1.0, 0.0], [0.0, 1.0]])
    b = StepGraphon([0.3, 0.7], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(RefinementOverflow):
        cut_distance(a, b, max_blocks=20)


def test_cut_distance_triangle_inequality():
    rng = np.random.default_rng(10)
    for _ in range(15):
        ws = [StepGraphon.uniform_blocks(np.triu(v) + np.triu(v, 1).T) for v in rng.random((3, 3, 3))]
        d = lambda a, b: cut_distance(a, b, merge=False).value
        assert d(ws[0], ws[2]) <= d(ws[0], ws[1]) + d(ws[1], ws[2]) + 1e-12


def test_lipschitz_in_l1():
    rng = np.random.default_rng(11)
    for _ in range(100):
        h = [EDGE, TRI, C4, Motif.preset("k4")][int(rng.integers(0, 4))]
        w1, w2 = random_graphon(rng, int(rng.integers(1, 5))), random_graphon(rng, int(rng.integers(1, 5)))
        assert abs(t_density(h, w1) - t_density(h, w2)) <= h.kappa * l1_distance(w1, w2) + 1e-12
