"""Random graph samplers, the edge-count coupling, tail enumeration and MCMC.

All randomness comes from numpy's counter-based Philox generator, keyed by
an integer seed, so every sampler is a deterministic function of its
arguments.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np

from .graphon import FiniteGraph, Motif, hom_count, t_density_graph

RNG_NAME = "philox"


def rng_for(seed, *stream: int) -> np.random.Generator:
    """Generator for ``seed`` on an independent named sub-stream."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(ss))


def _pairs(n: int):
    return np.triu_indices(n, 1)


def _graph_from_pair_ids(n: int, ids) -> FiniteGraph:
    iu, ju = _pairs(n)
    ids = np.asarray(ids, dtype=np.int64)
    return FiniteGraph(n, frozenset(zip(iu[ids].tolist(), ju[ids].tolist())))


def _pair_id(n: int, u: int, v: int) -> int:
    if u > v:
        u, v = v, u
    return u * n - u * (u + 1) // 2 + (v - u - 1)


def sample_gnp(n: int, p: float, seed) -> FiniteGraph:
    if n < 1 or not 0 <= p <= 1:
        raise ValueError("need n >= 1 and p in [0, 1]")
    rng = rng_for(seed)
    keep = rng.random(n * (n - 1) // 2) < p
    return _graph_from_pair_ids(n, np.flatnonzero(keep))


def _uniform_subset(rng: np.random.Generator, size: int, k: int) -> np.ndarray:
    # Fisher-Yates shuffle truncated to k items
    return rng.permutation(size)[:k]


def sample_gnm(n: int, m: int, seed) -> FiniteGraph:
    pairs = n * (n - 1) // 2
    if not 0 <= m <= pairs:
        raise ValueError(f"m must lie in [0, {pairs}]")
    rng = rng_for(seed)
    return _graph_from_pair_ids(n, np.sort(_uniform_subset(rng, pairs, m)))


# ---------------------------------------------------------------------------
# Coupling of G(n, m) with G(n, p) conditioned on an edge-count window
# ---------------------------------------------------------------------------


@dataclass
class CouplingTrace:
    g_uniform: FiniteGraph
    g_conditioned: FiniteGraph
    e_target: int
    d_n: int
    xor_size: int
    rejections: int = 0


def in_window(edges: int, n: int, p: float, eta: float) -> bool:
    return abs(2.0 * edges / n**2 - p) < eta


def couple(n: int, m_n: int, p: float, eta: float, seed, max_rejections: int = 10**6) -> CouplingTrace:
    """Draw G_n ~ G(n, m_n) and G_n^eta ~ (G(n, p) | 2|E|/n^2 in (p-eta, p+eta)).

    The second graph is obtained from the first by adding (shortage) or
    deleting (surplus) |D_n| uniformly chosen pairs, where D_n = M_n - m_n
    and M_n is a window-conditioned Bin(C(n,2), p) draw.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not in_window(m_n, n, p, eta):
        raise ValueError(f"2 m_n / n^2 = {2 * m_n / n**2:.6g} is outside ({p - eta}, {p + eta})")
    pairs = n * (n - 1) // 2
    g_rng = rng_for(seed, 0)
    chosen = _uniform_subset(g_rng, pairs, m_n)
    e_rng = rng_for(seed, 1)
    rejections = 0
    while True:
        e_n = int(e_rng.binomial(pairs, p))
        if in_window(e_n, n, p, eta):
            break
        rejections += 1
        if rejections >= max_rejections:
            raise RuntimeError("edge-count window rejection sampling did not terminate")
    d_n = e_n - m_n
    present = np.zeros(pairs, dtype=bool)
    present[chosen] = True
    other = present.copy()
    if d_n > 0:
        missing = np.flatnonzero(~present)
        other[missing[_uniform_subset(e_rng, missing.size, d_n)]] = True
    elif d_n < 0:
        have = np.flatnonzero(present)
        other[have[_uniform_subset(e_rng, have.size, -d_n)]] = False
    xor = int(np.count_nonzero(present ^ other))
    return CouplingTrace(_graph_from_pair_ids(n, np.flatnonzero(present)),
                         _graph_from_pair_ids(n, np.flatnonzero(other)), e_n, d_n, xor, rejections)


def conditioned_binomial_pmf(n: int, p: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Support and pmf of Bin(C(n,2), p) conditioned on the edge-count window."""
    from scipy.stats import binom

    pairs = n * (n - 1) // 2
    ks = np.arange(pairs + 1)
    mask = np.abs(2.0 * ks / n**2 - p) < eta
    logpmf = binom.logpmf(ks[mask], pairs, p)
    pmf = np.exp(logpmf - logpmf.max())
    return ks[mask], pmf / pmf.sum()


def lipschitz_check(h: Motif, g1: FiniteGraph, g2: FiniteGraph):
    """|t_H(G1) - t_H(G2)| <= kappa ||W_G1 - W_G2||_1 = 2 kappa |E1 xor E2| / n^2."""
    if g1.n != g2.n:
        raise ValueError("graphs must have the same vertex count")
    lhs = abs(t_density_graph(h, g1) - t_density_graph(h, g2))
    rhs = 2.0 * h.kappa * len(g1.edges ^ g2.edges) / g1.n**2
    return lhs, rhs, lhs <= rhs + 1e-12


# ---------------------------------------------------------------------------
# Tail probabilities by enumeration or Monte Carlo
# ---------------------------------------------------------------------------


EXACT_MAX_PAIRS = 28


class BudgetExceeded(RuntimeError):
    """The requested computation needs more work than the budget allows."""

    def __init__(self, message, partial_count=None):
        super().__init__(message)
        self.partial_count = partial_count
        self.usable = False


@dataclass
class TailEstimate:
    n: int
    m: int
    r: Fraction
    count: int | None
    total: int
    log_prob_rate: float
    method: str
    std_error: float | None = None
    samples: int | None = None

    @property
    def probability(self) -> Fraction | float:
        if self.method == "EXACT_ENUM":
            return Fraction(self.count, self.total)
        return self.count / self.samples

    @property
    def log_count_rate(self) -> float:
        """n^-2 log |{G : |E| = m, t_H(G) >= r}| (exact method only)."""
        if self.count == 0:
            return -math.inf
        return math.log(self.count) / self.n**2


def as_fraction(r) -> Fraction:
    if isinstance(r, Fraction):
        return r
    if isinstance(r, int):
        return Fraction(r)
    return Fraction(str(r))


def _meets(hom: np.ndarray, r: Fraction, n: int, k: int) -> np.ndarray:
    # hom / n^k >= r  <=>  hom * den >= num * n^k, in exact integers
    return hom.astype(object) * r.denominator >= r.numerator * n**k if n**k * r.numerator > 2**62 \
        else hom.astype(np.int64) * r.denominator >= r.numerator * n**k


def batch_hom(h: Motif, a: np.ndarray) -> np.ndarray:
    """hom(H, G) for a stack of adjacency matrices of shape (B, n, n)."""
    b, n, _ = a.shape
    used = sorted({v for e in h.edges for v in e})
    iso = h.k - len(used)
    if not h.edges:
        return np.full(b, n ** h.k, dtype=np.int64)
    from .graphon import _cycle_length, _einsum_spec

    cyc = _cycle_length(h)
    if h.kappa == 1:
        out = a.sum(axis=(1, 2))
    elif cyc is not None:
        pw = a
        for _ in range(cyc - 2):
            pw = pw @ a
        out = (pw * a).sum(axis=(1, 2))
    else:
        relabel = {v: i for i, v in enumerate(used)}
        e2 = tuple((relabel[u], relabel[v]) for u, v in h.edges)
        spec = ",".join("Z" + s for s in _einsum_spec(e2, len(used), False).split(","))
        out = np.einsum(spec + "->Z", *([a] * len(e2)), optimize="greedy")
    return np.rint(out).astype(np.int64) * n**iso


def _adjacency_from_masks(masks: np.ndarray, n: int) -> np.ndarray:
    iu, ju = _pairs(n)
    e = iu.size
    bits = np.unpackbits(masks.astype("<u4").view(np.uint8).reshape(-1, 4), axis=1, bitorder="little")
    bits = np.concatenate([bits[:, :e], np.zeros((masks.size, 1), np.uint8)], axis=1)
    idx = np.full((n, n), e)
    idx[iu, ju] = np.arange(e)
    idx[ju, iu] = np.arange(e)
    return bits[:, idx.ravel()].reshape(-1, n, n).astype(np.float32)


def _exact_count(n: int, m: int, h: Motif, r: Fraction, chunk: int = 1 << 22, sub: int = 1 << 18) -> int:
    e = n * (n - 1) // 2
    if h.k > 5 and n ** h.k >= 2**24:
        raise ValueError("motif too large for float32 batch counting")
    count = 0
    tri = _triangle_masks(n) if _is_triangle(h) else None
    for start in range(0, 1 << e, chunk):
        masks = np.arange(start, min(1 << e, start + chunk), dtype=np.uint32)
        masks = masks[np.bitwise_count(masks) == m]
        if tri is not None:
            hom = np.zeros(masks.size, dtype=np.int64)
            for t in tri:
                hom += (masks & t) == t
            count += int(np.count_nonzero(_meets(6 * hom, r, n, 3)))
            continue
        for s in range(0, masks.size, sub):
            a = _adjacency_from_masks(masks[s:s + sub], n)
            count += int(np.count_nonzero(_meets(batch_hom(h, a), r, n, h.k)))
    return count


def _triangle_masks(n: int) -> list:
    bit = {}
    for i, (u, v) in enumerate(itertools.combinations(range(n), 2)):
        bit[u, v] = 1 << i
    return [np.uint32(bit[a, b] | bit[a, c] | bit[b, c]) for a, b, c in itertools.combinations(range(n), 3)]


def enumerate_tail(n: int, m: int, h: Motif, r, method: str = "auto", budget: int = 10**8,
                   samples: int = 10**5, seed=0) -> TailEstimate:
    """|{G : |E(G)| = m, t_H(G) >= r}| and n^-2 log P(t_H(G(n, m)) >= r).

    EXACT_ENUM walks every edge set (n <= 8); MONTE_CARLO draws ``samples``
    independent G(n, m) graphs.  The threshold test uses exact rationals.
    """
    e = n * (n - 1) // 2
    if not 0 <= m <= e:
        raise ValueError(f"m must lie in [0, {e}]")
    r = as_fraction(r)
    total = math.comb(e, m)
    if method == "auto":
        method = "EXACT_ENUM" if e <= EXACT_MAX_PAIRS and total <= budget else "MONTE_CARLO"
    if method == "EXACT_ENUM":
        if e > EXACT_MAX_PAIRS:
            raise ValueError(f"exact enumeration needs C(n,2) <= {EXACT_MAX_PAIRS}")
        if total > budget:
            raise BudgetExceeded(f"C({e},{m}) = {total} graphs exceed the budget {budget}")
        if r <= 0:
            count = total
        else:
            count = _exact_count(n, m, h, r)
        rate = 0.0 if count == total else (math.log(count) - math.log(total)) / n**2 if count else -math.inf
        return TailEstimate(n, m, r, count, total, rate, "EXACT_ENUM")
    if method != "MONTE_CARLO":
        raise ValueError(f"unknown method {method!r}")
    if samples > budget:
        raise BudgetExceeded(f"{samples} samples exceed the budget {budget}")
    rng = rng_for(seed, 2)
    hits = 0
    batch = 4096
    done = 0
    while done < samples:
        size = min(batch, samples - done)
        adj = np.zeros((size, n, n), dtype=np.float32)
        iu, ju = _pairs(n)
        for b in range(size):
            ids = _uniform_subset(rng, e, m)
            adj[b, iu[ids], ju[ids]] = 1.0
        adj += adj.transpose(0, 2, 1)
        hits += int(np.count_nonzero(_meets(batch_hom(h, adj), r, n, h.k)))
        done += size
    phat = hits / samples
    rate = math.log(phat) / n**2 if hits else -math.inf
    se = math.sqrt((1 - phat) / (samples * phat)) / n**2 if hits else None
    return TailEstimate(n, m, r, hits, total, rate, "MONTE_CARLO", se, samples)


def nearest_half_edges(n: int) -> int:
    """m = C(n,2)/2 rounded to nearest, halves rounded up."""
    return math.floor(n * (n - 1) / 4 + 0.5)


def empirical_rate(n_list, m_of_n: Callable[[int], int] | None, h: Motif, r, budget: int = 10**8,
                   seed=0, psi: float | None = None, samples: int = 10**5) -> list[dict]:
    """Finite-n tail rates next to the variational value -psi for trend comparison."""
    from .rates import h_e

    m_of_n = m_of_n or nearest_half_edges
    rows = []
    for n in n_list:
        m = int(m_of_n(n))
        est = enumerate_tail(n, m, h, r, budget=budget, samples=min(samples, budget), seed=seed + n)
        e = n * (n - 1) // 2
        log_binom = (math.lgamma(e + 1) - math.lgamma(m + 1) - math.lgamma(e - m + 1)) / n**2
        row = {
            "n": n, "m": m, "p_n": m / e, "method": est.method, "count": est.count, "total": est.total,
            "log_prob_rate": est.log_prob_rate, "std_error": est.std_error,
            "log_binom_rate": log_binom, "log_count_rate": est.log_prob_rate + log_binom,
            "h_e_p_n": float(h_e(m / e)),
            "neg_psi": None if psi is None else -psi,
            "F_estimate": None if psi is None else float(h_e(m / e)) - psi,
        }
        if est.method == "EXACT_ENUM":
            row["log_count_rate"] = est.log_count_rate if est.count else -math.inf
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Edge-swap MCMC on {G : |E| = m, t_H(G) >= r}
# ---------------------------------------------------------------------------


def dense_start(n: int, m: int) -> FiniteGraph:
    """First m pairs in colex order: a clique grown one vertex at a time."""
    pairs = sorted(itertools.combinations(range(n), 2), key=lambda e: (e[1], e[0]))
    if m > len(pairs):
        raise ValueError("too many edges")
    return FiniteGraph(n, frozenset(pairs[:m]))


def _relabel(g: FiniteGraph, perm) -> FiniteGraph:
    return FiniteGraph(g.n, frozenset((int(perm[u]), int(perm[v])) for u, v in g.edges))


def _is_triangle(h: Motif) -> bool:
    return h.k == 3 and sorted(h.edges) == [(0, 1), (0, 2), (1, 2)]


def mcmc_conditioned(n: int, m: int, h: Motif, r, steps: int, seed, thin: int | None = None,
                     burn_in: int = 0, init: FiniteGraph | None = None, check: bool = False) -> Iterator[FiniteGraph]:
    """Metropolis edge-swap chain whose stationary law is uniform on the reachable
    part of {G : |E| = m, t_H(G) >= r}.

    Each step proposes moving a uniform present edge to a uniform absent pair
    and accepts iff the density constraint still holds.  Yields every
    ``thin``-th state after ``burn_in`` steps.
    """
    r = as_fraction(r)
    rng = rng_for(seed, 3)
    if init is None:
        init = _relabel(dense_start(n, m), rng.permutation(n))
    if init.m != m or init.n != n:
        raise ValueError("initial graph has the wrong size")
    hom = hom_count(h, init)
    if hom * r.denominator < r.numerator * n**h.k:
        raise ValueError("infeasible initial graph: t_H below r")
    thin = thin or max(1, steps // 100)
    iu, ju = _pairs(n)
    pairs = iu.size
    present_mask = np.zeros(pairs, dtype=bool)
    for u, v in init.edges:
        present_mask[_pair_id(n, u, v)] = True
    present = np.flatnonzero(present_mask).tolist()
    absent = np.flatnonzero(~present_mask).tolist()
    iu_l, ju_l = iu.tolist(), ju.tolist()
    threshold = r.numerator * n**h.k
    den = r.denominator
    tri = _is_triangle(h)
    adj = [0] * n
    for u, v in init.edges:
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    tcount = hom // 6 if tri else 0
    edge_motif = h.kappa == 1 and h.k == 2
    # pre-draw proposals in blocks for speed
    block = 1 << 16
    step = 0
    while step < steps:
        nb = min(block, steps - step)
        ei = rng.integers(0, m, nb).tolist() if m else [0] * nb
        ai = rng.integers(0, pairs - m, nb).tolist() if pairs > m else [0] * nb
        for s in range(nb):
            step += 1
            if m and pairs > m:
                pe = present[ei[s]]
                pa = absent[ai[s]]
                u, v = iu_l[pe], ju_l[pe]
                x, y = iu_l[pa], ju_l[pa]
                adj[u] ^= 1 << v
                adj[v] ^= 1 << u
                if tri:
                    lost = (adj[u] & adj[v]).bit_count()
                    gained = (adj[x] & adj[y]).bit_count()
                    new_t = tcount - lost + gained
                    ok = 6 * new_t * den >= threshold
                elif edge_motif:
                    ok = True
                else:
                    adj[x] ^= 1 << y
                    adj[y] ^= 1 << x
                    ok = _hom_from_bits(h, adj, n) * den >= threshold
                    adj[x] ^= 1 << y
                    adj[y] ^= 1 << x
                if ok:
                    adj[x] ^= 1 << y
                    adj[y] ^= 1 << x
                    present[ei[s]] = pa
                    absent[ai[s]] = pe
                    if tri:
                        tcount = new_t
                else:
                    adj[u] ^= 1 << v
                    adj[v] ^= 1 << u
            if step > burn_in and (step - burn_in) % thin == 0:
                g = _graph_from_pair_ids(n, sorted(present))
                if check:
                    assert g.m == m
                    assert hom_count(h, g) * den >= threshold
                yield g


def _hom_from_bits(h: Motif, adj: list, n: int) -> int:
    a = np.array([[(row >> j) & 1 for j in range(n)] for row in adj], dtype=np.int64)
    return hom_count(h, FiniteGraph.from_adjacency(a))


def run_chains(n: int, m: int, h: Motif, r, steps: int, seed, chains: int = 8, thin: int | None = None,
               burn_in: int = 0) -> dict:
    """Independent chains from distinct relabelled dense starts, with a
    Gelman-Rubin style spread of t_H across chains (diagnostic only)."""
    samples = []
    for c in range(chains):
        samples.append(list(mcmc_conditioned(n, m, h, r, steps, seed * 1000 + c,
                                             thin=thin, burn_in=burn_in)))
    stats = [np.array([t_density_graph(h, g) for g in chain]) for chain in samples]
    return {"samples": samples, "t_values": stats, "r_hat": gelman_rubin(stats)}


def gelman_rubin(chains: list) -> float:
    chains = [np.asarray(c, dtype=float) for c in chains if len(c) > 1]
    if len(chains) < 2:
        return float("nan")
    L = min(len(c) for c in chains)
    x = np.array([c[:L] for c in chains])
    w = x.var(axis=1, ddof=1).mean()
    b = L * x.mean(axis=1).var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else float("inf")
    var = (L - 1) / L * w + b / L
    return float(math.sqrt(var / w))
