"""Finite-n pictures: exact tail counts, the G(n, m) / G(n, p) coupling, the
edge-swap chain, and weak regularity.  Runs in well under a minute.
"""
import numpy as np

from graphldp.graphon import FiniteGraph, Motif, t_density_graph
from graphldp.randgraph import (couple, enumerate_tail, lipschitz_check, mcmc_conditioned, nearest_half_edges,
                                sample_gnp)
from graphldp.regularity import counting_check, quotient, weak_regularity

TRI = Motif.preset("triangle")

# %% Exact counts of m-edge graphs with many triangles.  At m = C(n,2)/2 the
#    target r = 0.2 is out of reach for n <= 8 (no such graph exists), so use
#    a lower target to see a nonzero tail.
for n in (6, 7):
    m = nearest_half_edges(n)
    for r in (0.1, 0.15, 0.2):
        est = enumerate_tail(n, m, TRI, r)
        print(f"n={n} m={m} r={r}: {est.count} of {est.total} graphs, n^-2 log P = {est.log_prob_rate:.4f}")

# %% Coupling: move from exactly m edges to a binomial edge count by adding or
#    deleting |D_n| random pairs; the triangle density moves by at most 6|D_n|/n^2.
for s in range(3):
    tr = couple(100, 2475, 0.5, 0.05, seed=s)
    lhs, rhs, ok = lipschitz_check(TRI, tr.g_uniform, tr.g_conditioned)
    print(f"seed {s}: D_n={tr.d_n:+d}  |dt|={lhs:.2e} <= {rhs:.2e}: {ok}")

# %% Edge-swap chain on {|E| = m, t >= r}: starts from a relabelled quasi-clique
#    and keeps the constraint at every step.
n, m = 30, nearest_half_edges(30)
ts = [t_density_graph(TRI, g) for g in mcmc_conditioned(n, m, TRI, 0.2, steps=100_000, seed=1, thin=10_000)]
print("triangle densities along the chain:", np.round(ts, 4))

# %% Weak regularity on a planted two-community graph.
rng = np.random.default_rng(0)
side = np.arange(120) < 60
probs = np.where(side[:, None] == side[None, :], 0.7, 0.2)
a = np.triu(rng.random((120, 120)) < probs, 1)
g = FiniteGraph.from_adjacency(a | a.T)
part = weak_regularity(g, 0.05)
print(f"{part.s} parts after {part.rounds} rounds, certificate {part.certificate:.4f}")
print(np.round(quotient(g, part).densities, 2))
print("counting check (t_G, t_quotient, bound, ok):", counting_check(TRI, g, part))
h = sample_gnp(200, 0.3, 1)
print("same for G(200, 0.3):", counting_check(TRI, h, weak_regularity(h, 0.15)))
