import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom, chi2

from graphldp.graphon import FiniteGraph, Motif, t_density_graph
from graphldp.randgraph import (BudgetExceeded, conditioned_binomial_pmf, couple, dense_start, empirical_rate,
                                enumerate_tail, gelman_rubin, in_window, lipschitz_check, mcmc_conditioned,
                                nearest_half_edges, rng_for, run_chains, sample_gnm, sample_gnp)

TRI = Motif.preset("triangle")
EDGE = Motif.preset("edge")


def brute_tail(n, m, r):
    """Count m-edge graphs on [n] with triangle density >= r via trace(A^3)."""
    pairs = list(itertools.combinations(range(n), 2))
    r = Fraction(str(r))
    count = 0
    for sub in itertools.combinations(pairs, m):
        a = np.zeros((n, n), dtype=np.int64)
        for u, v in sub:
            a[u, v] = a[v, u] = 1
        if Fraction(int(np.trace(a @ a @ a)), n**3) >= r:
            count += 1
    return count


# -- samplers -------------------------------------------------------------------------


def test_gnp_edge_cases():
    assert sample_gnp(6, 0.0, 1).m == 0
    assert sample_gnp(6, 1.0, 1) == FiniteGraph.complete(6)
    with pytest.raises(ValueError):
        sample_gnp(6, 1.5, 1)


def test_gnp_mean_edge_count():
    counts = [sample_gnp(20, 0.3, s).m for s in range(400)]
    mean, sd = 190 * 0.3, math.sqrt(190 * 0.3 * 0.7 / 400)
    assert abs(np.mean(counts) - mean) < 4 * sd


def test_gnm_edge_cases_and_determinism():
    assert sample_gnm(6, 0, 3).m == 0
    assert sample_gnm(6, 15, 3) == FiniteGraph.complete(6)
    assert sample_gnm(9, 17, 42) == sample_gnm(9, 17, 42)
    assert sample_gnm(9, 17, 42).m == 17
    with pytest.raises(ValueError):
        sample_gnm(4, 7, 0)


def test_gnm_is_uniform():
    # n = 5, m = 3: C(10, 3) = 120 edge sets, each with probability 1/120
    draws = 24_000
    freq = Counter(sample_gnm(5, 3, s).edges for s in range(draws))
    assert len(freq) == 120
    expected = draws / 120
    stat = sum((c - expected) ** 2 / expected for c in freq.values())
    assert stat < chi2.ppf(0.9999, 119)


def test_rng_streams_are_independent():
    a = rng_for(5, 0).random(4)
    b = rng_for(5, 1).random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(rng_for(5, 0).random(4), a)


# -- coupling ---------------------------------------------------------------------------


def test_couple_precondition():
    assert not in_window(10, 20, 0.5, 0.05)
    with pytest.raises(ValueError):
        couple(20, 10, 0.5, 0.05, seed=0)


def test_couple_xor_bound_and_marginal():
    for s in range(50):
        tr = couple(30, 217, 0.5, 0.05, seed=s)
        assert tr.g_uniform.m == 217 and tr.g_conditioned.m == tr.e_target
        assert tr.xor_size == abs(tr.d_n) == len(tr.g_uniform.edges ^ tr.g_conditioned.edges)
        assert in_window(tr.e_target, 30, 0.5, 0.05)
        lhs, rhs, ok = lipschitz_check(TRI, tr.g_uniform, tr.g_conditioned)
        assert ok and rhs == 2 * 3 * tr.xor_size / 900


def test_couple_zero_shift():
    # the window admits only m_n itself: the two graphs coincide
    n, m = 10, 25
    sup, _ = conditioned_binomial_pmf(n, 0.5, 0.011)
    assert list(sup) == [25]
    tr = couple(n, m, 0.5, 0.011, seed=3)
    assert tr.d_n == 0 and tr.g_uniform == tr.g_conditioned


def test_conditioned_pmf_matches_scipy():
    sup, pmf = conditioned_binomial_pmf(12, 0.4, 0.1)
    assert math.isclose(pmf.sum(), 1.0)
    raw = binom.pmf(sup, 66, 0.4)
    assert np.allclose(pmf, raw / raw.sum(), rtol=1e-12)
    assert np.all(np.abs(2 * sup / 144 - 0.4) < 0.1)


def test_couple_target_distribution():
    sup, pmf = conditioned_binomial_pmf(12, 0.4, 0.1)
    runs = 3000
    seen = Counter(couple(12, 29, 0.4, 0.1, seed=s).e_target for s in range(runs))
    mean = sum(k * c for k, c in seen.items()) / runs
    mu = float(sup @ pmf)
    sd = math.sqrt(float((sup - mu) ** 2 @ pmf) / runs)
    assert abs(mean - mu) < 4 * sd


def test_lipschitz_check_examples():
    g = sample_gnm(10, 20, 1)
    extra = next(e for e in itertools.combinations(range(10), 2) if e not in g.edges)
    g2 = FiniteGraph(10, g.edges | {extra})
    lhs, rhs, ok = lipschitz_check(TRI, g, g2)
    assert ok and math.isclose(rhs, 0.06)
    assert lipschitz_check(TRI, g, g) == (0.0, 0.0, True)
    with pytest.raises(ValueError):
        lipschitz_check(TRI, g, FiniteGraph(9))


# -- tail enumeration ----------------------------------------------------------------------


def test_enumerate_trivial_threshold():
    est = enumerate_tail(6, 7, TRI, 0)
    assert est.count == est.total == math.comb(15, 7) and est.log_prob_rate == 0.0


def test_enumerate_complete_graph():
    est = enumerate_tail(4, 6, TRI, 0.3)
    assert (est.count, est.total) == (1, 1)
    assert est.probability == 1


@pytest.mark.parametrize("n,m,r", [(5, 5, 0.1), (5, 6, 0.2), (6, 8, 0.1), (6, 9, 0.15), (5, 7, "6/25")])
def test_enumerate_matches_brute_force(n, m, r):
    est = enumerate_tail(n, m, TRI, r)
    assert est.method == "EXACT_ENUM"
    assert est.count == brute_tail(n, m, r)
    if est.count:
        expected = (math.log(est.count) - math.log(est.total)) / n**2
        assert math.isclose(est.log_prob_rate, expected, rel_tol=1e-12)


def test_enumerate_n7_fixtures():
    assert enumerate_tail(7, 10, TRI, 0.15).count == 21
    assert enumerate_tail(7, 10, TRI, 0.1).count == 8631


def test_enumerate_threshold_is_exact():
    # 2 triangles on 5 vertices give t = 12/125 exactly; the float 0.096 must not round it away
    hit = enumerate_tail(5, 5, TRI, "12/125").count
    assert hit == enumerate_tail(5, 5, TRI, 0.096).count == brute_tail(5, 5, Fraction(12, 125))
    assert hit > 0


def test_enumerate_other_motif_and_zero_count():
    path = Motif.preset("path2")
    est = enumerate_tail(5, 4, path, 0.2)
    pairs = list(itertools.combinations(range(5), 2))
    oracle = 0
    for sub in itertools.combinations(pairs, 4):
        deg = Counter(itertools.chain.from_iterable(sub))
        if Fraction(sum(d * d for d in deg.values()), 125) >= Fraction(1, 5):
            oracle += 1
    assert est.count == oracle
    none = enumerate_tail(6, 3, TRI, 0.5)
    assert none.count == 0 and none.log_prob_rate == -math.inf and none.log_count_rate == -math.inf


def test_enumerate_budget_and_validation():
    with pytest.raises(BudgetExceeded) as err:
        enumerate_tail(7, 10, TRI, 0.1, method="EXACT_ENUM", budget=1000)
    assert err.value.usable is False
    with pytest.raises(ValueError):
        enumerate_tail(9, 10, TRI, 0.1, method="EXACT_ENUM")
    with pytest.raises(ValueError):
        enumerate_tail(5, 11, TRI, 0.1)
    with pytest.raises(ValueError):
        enumerate_tail(5, 4, TRI, 0.1, method="magic")


def test_monte_carlo_agrees_with_exact():
    exact = enumerate_tail(6, 8, TRI, 0.1)
    p = float(exact.probability)
    mc = enumerate_tail(6, 8, TRI, 0.1, method="MONTE_CARLO", samples=20_000, seed=1)
    assert mc.method == "MONTE_CARLO" and mc.samples == 20_000
    assert abs(mc.probability - p) < 4 * math.sqrt(p * (1 - p) / 20_000)
    assert mc.std_error > 0


def test_auto_method_switches_to_monte_carlo():
    est = enumerate_tail(10, 22, TRI, 0.1, samples=2000, seed=0)
    assert est.method == "MONTE_CARLO"


def test_nearest_half_edges():
    assert [nearest_half_edges(n) for n in (4, 5, 6, 7, 8)] == [3, 5, 8, 11, 14]


def test_empirical_rate_rows():
    rows = empirical_rate([5, 6], None, TRI, 0, psi=0.0)
    for row in rows:
        assert row["log_prob_rate"] == 0.0
        assert math.isclose(row["log_count_rate"], math.log(row["total"]) / row["n"] ** 2)
        assert row["neg_psi"] == 0.0
    rows = empirical_rate([6], lambda n: 8, TRI, 0.1)
    row = rows[0]
    # count rate = probability rate + binomial-coefficient rate
    assert math.isclose(row["log_count_rate"], row["log_prob_rate"] + row["log_binom_rate"], rel_tol=1e-12)


# -- MCMC ---------------------------------------------------------------------------------------


def test_dense_start_is_colex_prefix():
    g = dense_start(5, 6)
    assert g.edges == {(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)}
    with pytest.raises(ValueError):
        dense_start(4, 7)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_mcmc_stays_in_constraint_set(seed):
    for g in mcmc_conditioned(12, 30, TRI, 0.15, steps=2000, seed=seed, thin=100, check=True):
        assert g.m == 30 and t_density_graph(TRI, g) >= 0.15


def test_mcmc_generic_motif_path():
    c4 = Motif.preset("c4")
    for g in mcmc_conditioned(8, 14, c4, 0.05, steps=300, seed=1, thin=50, check=True):
        assert t_density_graph(c4, g) >= 0.05


def test_mcmc_without_constraint_mixes_over_all_graphs():
    seen = {g.edges for g in mcmc_conditioned(6, 5, TRI, 0, steps=20_000, seed=2, thin=5)}
    assert len(seen) > 1000  # of C(15, 5) = 3003


def test_mcmc_stationary_law_is_uniform():
    # n = 5, m = 5, at least one triangle: compare visit frequencies with the uniform law
    r = Fraction(6, 125)
    feasible = brute_tail(5, 5, r)
    freq = Counter(g.edges for g in mcmc_conditioned(5, 5, TRI, r, steps=400_000, seed=4, thin=20, burn_in=1000))
    assert len(freq) == feasible
    total = sum(freq.values())
    expected = total / feasible
    stat = sum((c - expected) ** 2 / expected for c in freq.values())
    # thinned samples are nearly independent; allow generous slack for residual correlation
    assert stat < 2 * chi2.ppf(0.999, feasible - 1)


def test_mcmc_rejects_bad_start():
    with pytest.raises(ValueError):
        next(mcmc_conditioned(6, 5, TRI, 0.2, steps=10, seed=0, init=FiniteGraph(6, frozenset({(0, 1)}))))
    star = FiniteGraph(6, frozenset((0, j) for j in range(1, 6)))
    with pytest.raises(ValueError):
        next(mcmc_conditioned(6, 5, TRI, 0.01, steps=10, seed=0, init=star))


def test_mcmc_deterministic():
    a = [g.edges for g in mcmc_conditioned(10, 20, TRI, 0.1, steps=1000, seed=3, thin=100)]
    b = [g.edges for g in mcmc_conditioned(10, 20, TRI, 0.1, steps=1000, seed=3, thin=100)]
    assert a == b and len(a) == 10


def test_run_chains_and_gelman_rubin():
    out = run_chains(10, 20, TRI, 0.1, steps=2000, seed=1, chains=3, thin=200)
    assert len(out["samples"]) == 3 and all(len(c) == 10 for c in out["samples"])
    assert np.isfinite(out["r_hat"])
    assert gelman_rubin([[1.0, 1.0], [1.0, 1.0]]) == 1.0
    assert math.isnan(gelman_rubin([[1.0, 2.0]]))
