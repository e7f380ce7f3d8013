"""Named invariant checks, runnable as a suite (``graphldp verify``).

Each check is a function of a seed returning ``(ok, detail)``.  Sizes are
kept small so the whole suite runs in a couple of minutes; the test-suite
runs larger versions of the same properties.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from . import graphon as gr
from . import randgraph as rg
from . import rates
from . import regularity as reg
from . import varsolve as vs

REGISTRY: dict[str, Callable[[int], tuple[bool, str]]] = {}


def check(name: str):
    def deco(fn):
        REGISTRY[name] = fn
        return fn
    return deco


def _random_graphon(rng, k_max=6):
    k = int(rng.integers(1, k_max + 1))
    w = rng.random(k) + 0.2
    v = rng.random((k, k))
    return gr.StepGraphon(w / w.sum(), np.triu(v) + np.triu(v, 1).T)


def _random_kernel(rng, k):
    w = rng.random(k) + 0.2
    v = rng.standard_normal((k, k))
    return gr.StepKernel(w / w.sum(), np.triu(v) + np.triu(v, 1).T)


MOTIFS = [gr.Motif.preset(n) for n in ("edge", "triangle", "c4", "path2")]


def brute_cut_norm(kern: gr.StepKernel) -> float:
    m = kern.values * np.outer(kern.weights, kern.weights)
    k = kern.k
    best = 0.0
    for s in itertools.product([0, 1], repeat=k):
        for t in itertools.product([0, 1], repeat=k):
            best = max(best, abs(float(np.array(s) @ m @ np.array(t))))
    return best


def finite_difference(h: gr.Motif, w: gr.StepGraphon, step: float = 1e-5) -> np.ndarray:
    """Central differences of t_H in the symmetric block parameters (a_ij = a_ji moved together)."""
    k = w.k
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            e = np.zeros((k, k))
            e[i, j] = e[j, i] = step
            up = gr.t_density(h, gr.StepKernel(w.weights, w.values + e))
            dn = gr.t_density(h, gr.StepKernel(w.weights, w.values - e))
            out[i, j] = out[j, i] = (up - dn) / (2 * step)
    return out


def max_rel_error(a, b, floor: float = 1e-8) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


# -- graphon -----------------------------------------------------------------


@check("graphon.t_constant")
def _t_constant(seed):
    rng = np.random.default_rng(seed)
    err = 0.0
    for h in MOTIFS + [gr.Motif.preset("k4")]:
        for p in rng.random(5):
            err = max(err, abs(gr.t_density(h, gr.StepGraphon.constant(p, 3)) - p**h.kappa))
    return err < 1e-14, f"max error {err:.2e}"


@check("graphon.t_embed_equals_graph")
def _t_embed(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        n = int(rng.integers(1, 13))
        g = rg.sample_gnp(n, float(rng.random()), int(rng.integers(1 << 30)))
        for h in MOTIFS:
            if gr.t_density(h, gr.embed(g)) != gr.t_density_graph(h, g):
                return False, f"mismatch for {h} on n={n}"
    return True, "exact agreement"


@check("graphon.cut_norm_oracle")
def _cut_norm(seed):
    rng = np.random.default_rng(seed)
    for _ in range(40):
        kern = _random_kernel(rng, int(rng.integers(1, 6)))
        oracle = brute_cut_norm(kern)
        exact = gr.cut_norm(kern)
        heur = gr.cut_norm(kern, k_exact=0, restarts=4)
        if abs(exact - oracle) > 1e-12 or heur > oracle + 1e-12:
            return False, f"exact {exact} heuristic {heur} oracle {oracle}"
        if exact > gr.l1_distance(kern, gr.StepKernel(kern.weights, np.zeros_like(kern.values))) + 1e-12:
            return False, "cut norm exceeds L1 norm"
    return True, "exact path equals brute force; heuristic never exceeds it"


@check("graphon.cut_distance_triangle")
def _cut_triangle(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        ws = [gr.StepGraphon.uniform_blocks(np.triu(v) + np.triu(v, 1).T)
              for v in rng.random((3, 4, 4))]
        d = lambda a, b: gr.cut_distance(a, b, merge=False).value
        if d(ws[0], ws[2]) > d(ws[0], ws[1]) + d(ws[1], ws[2]) + 1e-12:
            return False, "triangle inequality violated"
    return True, "triangle inequality holds"


@check("graphon.t_gradient_fd")
def _t_grad(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        h = MOTIFS[int(rng.integers(0, 3))]
        w = _random_graphon(rng)
        worst = max(worst, max_rel_error(gr.t_gradient(h, w), finite_difference(h, w)))
    return worst < 1e-4, f"max relative error {worst:.2e}"


@check("graphon.t_lipschitz_l1")
def _t_lip(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        h = MOTIFS[int(rng.integers(0, len(MOTIFS)))]
        w1, w2 = _random_graphon(rng), _random_graphon(rng)
        if abs(gr.t_density(h, w1) - gr.t_density(h, w2)) > h.kappa * gr.l1_distance(w1, w2) + 1e-12:
            return False, "Lipschitz bound violated"
    return True, "kappa * L1 bound holds"


# -- rates -------------------------------------------------------------------


@check("rates.i_p_convex")
def _ip_convex(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.05, 0.95)
    x, y = rng.random(10_000), rng.random(10_000)
    lhs = rates.i_p(p, (x + y) / 2)
    rhs = 0.5 * (rates.i_p(p, x) + rates.i_p(p, y))
    return bool(np.all(lhs <= rhs + 1e-15)), "midpoint convexity"


@check("rates.entropy_identity")
def _ip_identity(seed):
    x = np.linspace(0, 1, 1001)
    err = 0.0
    for p in (0.1, 0.3, 0.5, 0.9):
        ident = -rates.h_e(x) - x / 2 * math.log(p) - (1 - x) / 2 * math.log1p(-p)
        err = max(err, float(np.max(np.abs(rates.i_p(p, x) - ident))))
    return err < 1e-12, f"max error {err:.2e}"


@check("rates.i_p_graphon_nonnegative")
def _ip_nonneg(seed):
    rng = np.random.default_rng(seed)
    p = 0.4
    if rates.i_p_graphon(p, gr.StepGraphon.constant(p, 4)) != 0.0:
        return False, "constant p has nonzero rate"
    for _ in range(100):
        if rates.i_p_graphon(p, _random_graphon(rng)) <= 0:
            return False, "non-positive rate for non-constant graphon"
    return True, "nonnegative, zero exactly at the constant"


@check("rates.i_p_graphon_permutation")
def _ip_perm(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        w = _random_graphon(rng)
        if abs(rates.i_p_graphon(0.3, w) - rates.i_p_graphon(0.3, w.permuted(rng.permutation(w.k)))) > 1e-14:
            return False, "not permutation invariant"
    return True, "permutation invariant"


# -- varsolve ----------------------------------------------------------------

_TRI = gr.Motif.preset("triangle")


def _psi(r, blocks=8, mode=vs.Mode.INEQUALITY, kind=vs.Kind.PSI, seed=0, restarts=8, init=()):
    spec = vs.ProblemSpec(_TRI, 0.5, r, kind, mode, blocks=blocks)
    return vs.solve(spec, restarts=restarts, seed=seed, init=init, threads=1)


@check("varsolve.feasible_at_return")
def _vs_feasible(seed):
    for mode in vs.Mode:
        res = _psi(0.2, mode=mode, seed=seed)
        t_ok = abs(res.t_residual) <= 1e-7 if mode is vs.Mode.EQUALITY else res.t_residual >= -1e-7
        if not (t_ok and abs(res.mass_residual) <= 1e-9):
            return False, f"{mode.value}: t {res.t_residual:.2e} mass {res.mass_residual:.2e}"
    return True, "t and mass residuals within tolerance"


@check("varsolve.phi_le_psi")
def _vs_nesting(seed):
    for r in (0.15, 0.2, 0.25):
        psi = _psi(r, seed=seed)
        phi = _psi(r, kind=vs.Kind.PHI, seed=seed, init=(psi.optimizer,))
        if phi.value > psi.value + 1e-8:
            return False, f"phi {phi.value} > psi {psi.value} at r={r}"
    return True, "phi <= psi"


@check("varsolve.psi_monotone")
def _vs_monotone(seed):
    vals = [_psi(r, seed=seed).value for r in (0.15, 0.2, 0.25)]
    return bool(np.all(np.diff(vals) > 0)), f"values {vals}"


@check("varsolve.entropy_identity")
def _vs_entropy(seed):
    psi = _psi(0.2, seed=seed)
    f = _psi(0.2, kind=vs.Kind.F_ENTROPY, mode=vs.Mode.EQUALITY, seed=seed, init=(psi.optimizer,))
    gap = abs(f.value + psi.value - rates.h_e(0.5))
    return gap < 1e-5, f"|F + psi - h_e(p)| = {gap:.2e}"


@check("varsolve.kkt_and_recompute")
def _vs_kkt(seed):
    res = _psi(0.2, seed=seed)
    recomputed = rates.i_p_graphon(0.5, res.optimizer)
    ok = res.kkt_residual < 1e-5 and abs(recomputed - res.value) <= 1e-12
    return ok, f"kkt {res.kkt_residual:.2e}, recompute gap {abs(recomputed - res.value):.2e}"


@check("varsolve.refinement_monotone")
def _vs_refine(seed):
    coarse = _psi(0.2, blocks=4, seed=seed)
    fine = _psi(0.2, blocks=8, seed=seed, init=(coarse.optimizer,))
    return fine.value <= coarse.value + 1e-8, f"k=4 {coarse.value:.10f}, k=8 {fine.value:.10f}"


@check("varsolve.block_merge_symmetry")
def _vs_merge(seed):
    res = _psi(0.2, seed=seed)
    merged = res.optimizer.merged(1e-6)
    gap = abs(rates.i_p_graphon(0.5, merged) - res.value)
    return gap <= 1e-8, f"merged {res.optimizer.k} -> {merged.k} blocks, value gap {gap:.2e}"


# -- randgraph ---------------------------------------------------------------


@check("randgraph.couple_xor_bound")
def _rg_couple(seed):
    n, m, p, eta = 60, 885, 0.5, 0.05
    for i in range(200):
        tr = rg.couple(n, m, p, eta, seed * 10_000 + i)
        added = tr.g_conditioned.edges - tr.g_uniform.edges
        removed = tr.g_uniform.edges - tr.g_conditioned.edges
        if tr.xor_size != abs(tr.d_n) or tr.xor_size >= eta * n**2 or (added and removed):
            return False, f"run {i}: xor {tr.xor_size}, d_n {tr.d_n}"
    return True, "xor = |d_n| < eta n^2, single-direction edits"


@check("randgraph.couple_stream_discipline")
def _rg_streams(seed):
    a = rg.couple(40, 390, 0.5, 0.05, seed)
    b = rg.couple(40, 390, 0.49, 0.2, seed)
    return a.g_uniform == b.g_uniform, "G(n, m) draw independent of the conditioning stage"


@check("randgraph.mcmc_constraints")
def _rg_mcmc(seed):
    n, m = 14, 46
    count = 0
    for g in rg.mcmc_conditioned(n, m, _TRI, 0.2, 20_000, seed, thin=500, check=True):
        count += 1
        if g.m != m or gr.t_density_graph(_TRI, g) < 0.2:
            return False, "constraint violated"
    return True, f"{count} samples satisfy |E| = m and t >= r"


@check("randgraph.enumerate_relabel_invariant")
def _rg_relabel(seed):
    h = gr.Motif.preset("path2")
    a = rg.enumerate_tail(6, 7, h, 0.2).count
    b = rg.enumerate_tail(6, 7, h.relabeled([2, 0, 1]), 0.2).count
    return a == b, f"counts {a} and {b}"


@check("randgraph.empirical_rate_zero")
def _rg_rate_zero(seed):
    rows = rg.empirical_rate([4, 5, 6], None, _TRI, 0, seed=seed)
    return all(r["log_prob_rate"] == 0.0 for r in rows), "rate exactly 0 at r = 0"


# -- regularity --------------------------------------------------------------


@check("regularity.quotient_exact")
def _reg_quotient(seed):
    g = rg.sample_gnp(30, 0.4, seed)
    part = reg.weak_regularity(g, 0.2)
    q = reg.quotient(g, part)
    for i, j in itertools.product(range(part.s), repeat=2):
        if reg.pair_density(g, part.parts[i], part.parts[j]) != q.exact(i, j):
            return False, "densities differ from direct count"
    sym = np.array_equal(q.densities, q.densities.T)
    return sym, "densities reproduce exactly"


@check("regularity.part_count_bound")
def _reg_parts(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        n = int(rng.integers(10, 60))
        eps = float(rng.uniform(0.1, 0.3))
        part = reg.weak_regularity(rg.sample_gnp(n, float(rng.random()), int(rng.integers(1 << 30))), eps)
        if part.s > 4 ** (1 / eps**2) or part.s > 2**part.splits or part.rounds > math.ceil(1 / eps**2):
            return False, f"s={part.s}, rounds={part.rounds}"
    return True, "s <= 2^splits <= 4^(1/eps^2)"


@check("regularity.counting_sweep")
def _reg_counting(seed):
    rng = np.random.default_rng(seed)
    for i in range(100):
        n = int(rng.integers(5, 50))
        eps = float(rng.choice([0.1, 0.15, 0.2, 0.3]))
        g = rg.sample_gnp(n, float(rng.random()), int(rng.integers(1 << 30)))
        part = reg.weak_regularity(g, eps, seed=i)
        for h in (_TRI, gr.Motif.preset("c4")):
            if not reg.counting_check(h, g, part)[3]:
                return False, f"run {i} failed"
    return True, "100 random (G, eps) pairs pass"


@check("regularity.rounding_helper")
def _reg_round(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        w = _random_graphon(rng)
        eps = float(rng.uniform(0.01, 0.3))
        wr = reg.round_quotient(w, eps)
        if gr.t_density(_TRI, wr) < gr.t_density(_TRI, w) - 1e-15:
            return False, "rounding lowered t_H"
        if gr.edge_density(wr) - gr.edge_density(w) > eps + 1e-12:
            return False, "edge density rose by more than eps"
    return True, "t_H no smaller, density up by <= eps"


# -- cli ---------------------------------------------------------------------


@check("cli.deterministic_output")
def _cli_determinism(seed):
    from .cli import run_to_string

    args = ["couple", "--n", "40", "--m", "390", "--p", "0.5", "--eta", "0.05", "--runs", "5",
            "--seed", str(seed)]
    a = run_to_string(args + ["--threads", "1"])
    b = run_to_string(args + ["--threads", "2"])
    return a == b, "identical bytes across runs and thread counts"


SUITES = sorted({name.split(".")[0] for name in REGISTRY})


def run_suite(suite: str = "all", seed: int = 0, names=None):
    """Yield ``(name, ok, detail)`` for every check in ``suite``."""
    for name, fn in REGISTRY.items():
        if names is not None and name not in names:
            continue
        if suite != "all" and not name.startswith(suite + "."):
            continue
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        yield name, bool(ok), detail
