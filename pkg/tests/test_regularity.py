import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from graphldp.graphon import FiniteGraph, Motif, StepGraphon, cut_norm, StepKernel, edge_density, t_density
from graphldp.randgraph import sample_gnp
from graphldp.regularity import (Partition, block_event_logprob, counting_check, pair_density, quotient,
                                 round_quotient, weak_regularity)

TRI = Motif.preset("triangle")
EDGE = Motif.preset("edge")
K33 = FiniteGraph(6, frozenset((u, v) for u in range(3) for v in range(3, 6)))


def brute_block_event(n, m, partition, a, events="both"):
    """n^-2 log P(E1 and E2) for G(n, m) by walking every edge set."""
    p = Fraction(m, n * (n - 1) // 2)
    a = [[Fraction(str(x)) for x in row] for row in a]
    pairs = list(itertools.combinations(range(n), 2))
    hits = total = 0
    for sub in itertools.combinations(pairs, m):
        g = FiniteGraph(n, frozenset(sub))
        ok = True
        for i, j in itertools.combinations_with_replacement(range(partition.s), 2):
            d = pair_density(g, partition.parts[i], partition.parts[j])
            if a[i][j] > p and events in ("both", "upper") and d < a[i][j]:
                ok = False
            if a[i][j] < p and events in ("both", "lower") and d > a[i][j]:
                ok = False
        hits += ok
        total += 1
    return math.log(hits / total) / n**2 if hits else -math.inf


# -- partitions and quotients -------------------------------------------------------


def test_partition_validation_and_json():
    with pytest.raises(ValueError):
        Partition(4, [[0, 1], [1, 2, 3]])
    with pytest.raises(ValueError):
        Partition(4, [[0, 1], []])
    with pytest.raises(ValueError):
        Partition(4, [[0, 1], [2]])
    p = Partition(5, [[4, 0], [1, 2, 3]])
    assert p.parts == [[0, 4], [1, 2, 3]] and list(p.sizes) == [2, 3] and list(p.labels) == [0, 1, 1, 1, 0]
    assert Partition.from_json(p.to_json()).parts == p.parts
    assert Partition.from_labels([3, 1, 1, 3, 0]).parts == [[0, 3], [1, 2], [4]]


def test_pair_density_examples():
    k3 = FiniteGraph.complete(3)
    assert pair_density(k3, range(3), range(3)) == Fraction(2, 3)
    assert pair_density(K33, [0, 1, 2], [3, 4, 5]) == 1
    assert pair_density(K33, [0, 1, 2], [0, 1, 2]) == 0
    with pytest.raises(ValueError):
        pair_density(k3, [], [0])


def test_quotient_examples():
    g = sample_gnp(9, 0.4, 1)
    q = quotient(g, Partition.singletons(9))
    assert np.array_equal(q.densities, g.adjacency)
    q1 = quotient(g, Partition.trivial(9))
    assert q1.exact(0, 0) == Fraction(2 * g.m, 81)
    qb = quotient(K33, Partition(6, [[0, 1, 2], [3, 4, 5]]))
    assert np.array_equal(qb.densities, [[0, 1], [1, 0]])
    assert math.isclose(edge_density(q1.graphon), edge_density_of(g))
    with pytest.raises(ValueError):
        quotient(g, Partition.trivial(8))


def edge_density_of(g):
    return 2 * g.m / g.n**2


def test_quotient_exact_against_pair_density():
    rng = np.random.default_rng(0)
    for _ in range(20):
        g = sample_gnp(10, float(rng.random()), int(rng.integers(1 << 30)))
        part = Partition.from_labels(rng.integers(0, 3, 10))
        q = quotient(g, part)
        for i, j in itertools.product(range(part.s), repeat=2):
            assert q.exact(i, j) == pair_density(g, part.parts[i], part.parts[j])


def test_quotient_csv():
    text = quotient(K33, Partition(6, [[0, 1, 2], [3, 4, 5]])).to_csv()
    assert text.splitlines() == ["size,a0,a1", "3,0.0,1.0", "3,1.0,0.0"]


# -- weak regularity -------------------------------------------------------------------


def test_weak_regularity_trivial_graphs():
    for g in (FiniteGraph(12), FiniteGraph.complete(12)):
        part = weak_regularity(g, 0.2)
        assert part.s == 1 and part.rounds == 0 and part.certificate <= 0.2


def test_weak_regularity_finds_planted_blocks():
    g = FiniteGraph(12, frozenset(itertools.combinations(range(6), 2)) | frozenset(
        itertools.combinations(range(6, 12), 2)))
    part = weak_regularity(g, 0.1)
    assert part.certificate <= 0.1 and part.s >= 2
    # the residual is small in cut norm by an independent exact computation of the certificate bound
    q = quotient(g, part)
    resid = StepKernel(np.full(12, 1 / 12), g.adjacency - q.densities[np.ix_(part.labels, part.labels)])
    assert cut_norm(resid) <= 0.1 + 1e-12


def test_weak_regularity_random_graph():
    g = sample_gnp(200, 0.3, 5)
    part = weak_regularity(g, 0.15, restarts=8)
    assert part.certificate <= 0.15
    assert part.s <= 4 ** math.ceil(1 / 0.15**2)
    assert part.splits == 2 * part.rounds


def test_weak_regularity_validation():
    with pytest.raises(ValueError):
        weak_regularity(FiniteGraph(4), 0.0)


def test_counting_check_examples():
    g = sample_gnp(15, 0.4, 2)
    t_g, t_q, bound, ok = counting_check(TRI, g, Partition.singletons(15), eps=0.1)
    assert t_g == t_q and ok and math.isclose(bound, 0.3)
    t_g, t_q, _, ok = counting_check(EDGE, g, Partition.trivial(15), eps=0.01)
    assert math.isclose(t_g, t_q, rel_tol=1e-13) and ok
    with pytest.raises(ValueError):
        counting_check(TRI, g, Partition.trivial(15))


def test_counting_check_after_regularity():
    g = sample_gnp(200, 0.3, 11)
    part = weak_regularity(g, 0.1, restarts=8)
    t_g, t_q, bound, ok = counting_check(TRI, g, part)
    assert ok and math.isclose(bound, 0.3)


def test_round_quotient():
    w = StepGraphon([0.5, 0.5], [[0.31, 0.5], [0.5, 0.99]])
    r = round_quotient(w, 0.1)
    assert np.allclose(r.values, [[0.4, 0.5], [0.5, 1.0]])
    assert np.all(r.values >= w.values)
    assert t_density(TRI, r) >= t_density(TRI, w)


# -- block events -------------------------------------------------------------------------

HALVES6 = Partition(6, [[0, 1, 2], [3, 4, 5]])
HALVES8 = Partition(8, [[0, 1, 2, 3], [4, 5, 6, 7]])


@pytest.mark.parametrize("a,events", [
    ([[0.2, 0.7], [0.7, 0.2]], "both"),
    ([[0.2, 0.7], [0.7, 0.2]], "upper"),
    ([[0.2, 0.7], [0.7, 0.2]], "lower"),
    ([[0.0, 0.8], [0.8, 0.4]], "both"),
])
def test_block_event_exact_matches_brute_force(a, events):
    oracle = brute_block_event(6, 7, HALVES6, a, events)
    ex = block_event_logprob(6, 7, HALVES6, a, mode="exact", events=events)
    conv = block_event_logprob(6, 7, HALVES6, a, mode="convolution", events=events)
    assert math.isclose(ex.value, oracle, rel_tol=1e-12)
    assert math.isclose(conv.value, oracle, rel_tol=1e-9)


def test_block_event_bipartite_n8():
    a = [[0.0, 0.875], [0.875, 0.0]]
    res = block_event_logprob(8, 14, HALVES8, a, mode="exact")
    assert math.isclose(res.value, -0.19874701607690826, rel_tol=1e-12)
    assert -res.i_p - 0.5 <= res.value <= -res.i_p + 0.5
    conv = block_event_logprob(8, 14, HALVES8, a, mode="convolution")
    assert math.isclose(conv.value, res.value, rel_tol=1e-9)


@pytest.mark.parametrize("n", [8, 40, 120])
def test_block_event_bound_contains_value(n):
    half = n // 2
    part = Partition(n, [list(range(half)), list(range(half, n))])
    m = n * (n - 1) // 4
    a = [[0.25, 0.75], [0.75, 0.25]]
    conv = block_event_logprob(n, m, part, a, mode="convolution")
    b = block_event_logprob(n, m, part, a, mode="bound")
    assert b.lower <= conv.value <= b.upper
    assert b.eps_n >= 0 and math.isclose(b.lower + b.upper, -2 * b.i_p)


def test_block_event_single_part():
    part = Partition.trivial(6)
    assert block_event_logprob(6, 8, part, [[0.5]], mode="exact", events="upper").value == 0.0
    res = block_event_logprob(6, 8, part, [[0.55]], mode="exact", events="upper")
    assert res.value == -math.inf and res.flagged


def test_block_event_a_equal_p_is_unconstrained():
    p = 7 / 15
    res = block_event_logprob(6, 7, HALVES6, [[p, p], [p, p]], mode="exact")
    assert res.value == 0.0 and res.i_p == 0.0


def test_block_event_errors():
    with pytest.raises(ValueError):
        block_event_logprob(10, 22, Partition.trivial(10), [[0.5]], mode="exact")
    with pytest.raises(ValueError):
        block_event_logprob(6, 7, HALVES6, [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        block_event_logprob(6, 7, HALVES6, [[0.5]])
    with pytest.raises(ValueError):
        block_event_logprob(6, 7, HALVES6, [[0.5, 0.5], [0.5, 0.5]], mode="magic")
    with pytest.raises(ValueError):
        block_event_logprob(6, 0, HALVES6, [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ValueError):
        block_event_logprob(6, 7, Partition.trivial(5), [[0.5]])


def test_weak_regularity_partition_serialises():
    part = weak_regularity(sample_gnp(30, 0.5, 1), 0.3)
    assert json.loads(part.to_json()) == part.parts
