"""Weak regularity partitions, quotient graphs and block-event probabilities."""
from __future__ import annotations

import csv
import heapq
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp
from scipy.stats import binom

from .graphon import (FiniteGraph, Motif, StepGraphon, StepKernel, cut_norm_search, edge_density,
                      t_density, t_density_graph)
from .rates import i_p, i_p_graphon


@dataclass
class Partition:
    """Disjoint cover of {0, ..., n-1}.  ``eps``/``rounds``/``splits`` and
    ``certificate`` are filled in by :func:`weak_regularity`."""

    n: int
    parts: list
    eps: float | None = None
    rounds: int = 0
    splits: int = 0
    certificate: float | None = None

    def __post_init__(self):
        parts = [sorted(int(v) for v in p) for p in self.parts]
        if any(not p for p in parts):
            raise ValueError("parts must be nonempty")
        flat = [v for p in parts for v in p]
        if sorted(flat) != list(range(self.n)):
            raise ValueError("parts must form a disjoint cover of range(n)")
        self.parts = parts

    @property
    def s(self) -> int:
        return len(self.parts)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(p) for p in self.parts])

    @property
    def labels(self) -> np.ndarray:
        lab = np.empty(self.n, dtype=int)
        for i, p in enumerate(self.parts):
            lab[p] = i
        return lab

    @classmethod
    def from_labels(cls, labels, **kw) -> "Partition":
        labels = np.asarray(labels)
        _, inv = np.unique(labels, return_inverse=True, axis=0) if labels.ndim > 1 else np.unique(labels, return_inverse=True)
        inv = inv.reshape(-1)
        # order parts by smallest member so the result is canonical
        first = {}
        for v, c in enumerate(inv):
            first.setdefault(int(c), v)
        order = sorted(first, key=first.get)
        parts = [np.flatnonzero(inv == c).tolist() for c in order]
        return cls(len(inv), parts, **kw)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(n, [[v] for v in range(n)])

    @classmethod
    def trivial(cls, n: int) -> "Partition":
        return cls(n, [list(range(n))])

    def indicator(self) -> np.ndarray:
        b = np.zeros((self.n, self.s), dtype=np.int64)
        b[np.arange(self.n), self.labels] = 1
        return b

    def to_json(self) -> str:
        return json.dumps(self.parts)

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        parts = json.loads(text)
        return cls(sum(len(p) for p in parts), parts)


def pair_density(g: FiniteGraph, x, y) -> Fraction:
    """d_G(X, Y): ordered pairs (x, y) in X x Y that are edges, over |X||Y|."""
    x, y = list(x), list(y)
    if not x or not y:
        raise ValueError("vertex sets must be nonempty")
    a = g.adjacency
    return Fraction(int(a[np.ix_(x, y)].sum()), len(x) * len(y))


@dataclass
class QuotientGraph:
    partition: Partition
    counts: np.ndarray  # ordered-pair edge counts between parts
    densities: np.ndarray = field(init=False)

    def __post_init__(self):
        sz = self.partition.sizes
        self.densities = self.counts / np.outer(sz, sz)

    def exact(self, i: int, j: int) -> Fraction:
        sz = self.partition.sizes
        return Fraction(int(self.counts[i, j]), int(sz[i] * sz[j]))

    @property
    def graphon(self) -> StepGraphon:
        return StepGraphon(self.partition.sizes / self.partition.n, self.densities)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size"] + [f"a{j}" for j in range(self.partition.s)])
        for i, row in enumerate(self.densities):
            w.writerow([int(self.partition.sizes[i])] + [repr(float(v)) for v in row])
        return buf.getvalue()


def quotient(g: FiniteGraph, partition: Partition) -> QuotientGraph:
    if partition.n != g.n:
        raise ValueError(f"partition covers {partition.n} vertices, graph has {g.n}")
    b = partition.indicator()
    return QuotientGraph(partition, b.T @ g.adjacency.astype(np.int64) @ b)


def _step_matrix(a: np.ndarray, partition: Partition, q: QuotientGraph) -> np.ndarray:
    lab = partition.labels
    return q.densities[np.ix_(lab, lab)]


def weak_regularity(g: FiniteGraph, eps: float, restarts: int = 16, seed: int = 0,
                    k_exact: int = 16) -> Partition:
    """Frieze-Kannan greedy refinement.

    While the cut-norm search finds sets S, T with
    |<W_G - W_quotient, 1_S x 1_T>| > eps, every part is split by S and by T.
    Each such round raises the quotient energy by more than eps^2, so at
    most ceil(1/eps^2) rounds (two single-set splits each) happen and the
    part count is at most 4^(1/eps^2).  The final certificate is the largest
    violation found; for n > k_exact it comes from a local search and is a
    lower bound on the true residual cut norm.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = g.n
    a = g.adjacency.astype(float)
    weights = np.full(n, 1.0 / n)
    part = Partition.trivial(n)
    max_rounds = math.ceil(1.0 / eps**2)
    rounds = splits = 0
    while True:
        q = quotient(g, part)
        resid = StepKernel(weights, a - _step_matrix(a, part, q))
        found = cut_norm_search(resid, k_exact=k_exact, hard_cap=max(n, 64), restarts=restarts,
                                seed=seed + rounds)
        if found.value <= eps or rounds >= max_rounds:
            break
        lab = np.stack([part.labels, found.rows.astype(int), found.cols.astype(int)], axis=1)
        part = Partition.from_labels(lab)
        rounds += 1
        splits += 2
    part.eps, part.rounds, part.splits, part.certificate = eps, rounds, splits, float(found.value)
    return part


def counting_check(h: Motif, g: FiniteGraph, partition: Partition, eps: float | None = None):
    """(t_H(G), t_H(G_hat), kappa eps, ok) for the quotient of ``partition``."""
    eps = partition.eps if eps is None else eps
    if eps is None:
        raise ValueError("eps is required for partitions not made by weak_regularity")
    t_g = t_density_graph(h, g)
    t_q = t_density(h, quotient(g, partition).graphon)
    bound = h.kappa * eps
    return t_g, t_q, bound, abs(t_g - t_q) <= bound + 1e-12


def round_quotient(w: StepGraphon, eps: float) -> StepGraphon:
    """Round every block value up to a multiple of eps (capped at 1)."""
    v = np.minimum(np.ceil(w.values / eps - 1e-9) * eps, 1.0)
    v = np.maximum(v, w.values)
    return StepGraphon(w.weights, v)


# ---------------------------------------------------------------------------
# Block events E1 (densities at least a_ij where a_ij > p) and
# E2 (at most a_ij where a_ij < p)
# ---------------------------------------------------------------------------


@dataclass
class BlockEventResult:
    mode: str
    value: float | None  # n^-2 log P(event) for exact / convolution
    lower: float | None
    upper: float | None
    i_p: float
    eps_n: float | None
    flagged: bool = False
    note: str = ""


def _cells(partition: Partition):
    """Unordered part pairs (i <= j) with their pair counts N_ij."""
    sz = partition.sizes
    for i in range(partition.s):
        for j in range(i, partition.s):
            n_pairs = sz[i] * sz[j] if i != j else sz[i] * (sz[i] - 1) // 2
            yield i, j, int(n_pairs)


def _allowed_counts(i, j, n_pairs, sz, a: Fraction, p: Fraction, events: str) -> np.ndarray:
    """Boolean mask over edge counts k = 0..n_pairs satisfying the cell event."""
    k = np.arange(n_pairs + 1)
    ordered = 2 * k if i == j else k  # d_G uses ordered pairs
    denom = int(sz[i] * sz[j])
    ok = np.ones(n_pairs + 1, dtype=bool)
    if a > p and events in ("both", "upper"):
        ok = ordered * a.denominator >= a.numerator * denom
    elif a < p and events in ("both", "lower"):
        ok = ordered * a.denominator <= a.numerator * denom
    return ok


def _frac(x) -> Fraction:
    # snap floats such as 7/15 back to the small-denominator rational they round from,
    # so that a_ij = p is recognised exactly
    return x if isinstance(x, Fraction) else Fraction(str(float(x))).limit_denominator(10**9)


def block_event_logprob(n: int, m: int, partition: Partition, a_matrix, mode: str = "bound",
                        events: str = "both", exact_max_n: int = 8) -> BlockEventResult:
    """n^-2 log P(E1 and E2) for G ~ G(n, m), with p = m / C(n, 2).

    Cells with a_ij = p carry no constraint.  Modes:

    exact        enumerate every graph with m edges (n <= 8);
    convolution  exact value from independent block binomials conditioned
                 on the total edge count (any n);
    bound        the interval -I_p(W_hat) -/+ eps_n, where eps_n is the
                 larger deviation from -I_p(W_hat) of a Chernoff upper bound
                 and a single-allocation lower bound (both rigorous).
    """
    if partition.n != n:
        raise ValueError("partition size mismatch")
    if events not in ("both", "upper", "lower"):
        raise ValueError(f"unknown events {events!r}")
    n_all = n * (n - 1) // 2
    if not 0 < m < n_all:
        raise ValueError("need 0 < m < C(n, 2)")
    a = np.asarray(a_matrix, dtype=float)
    if a.shape != (partition.s, partition.s) or np.any(a < 0) or np.any(a > 1):
        raise ValueError("a_matrix must be an s x s matrix with entries in [0, 1]")
    p = Fraction(m, n_all)
    sz = partition.sizes
    w_hat = StepGraphon(sz / n, a)
    # sum_ij w_i w_j a_ij = p up to the O(1/n) diagonal convention
    if abs(edge_density(w_hat) - float(p)) > 1.0 / n + 1e-12:
        raise ValueError(f"a_matrix has edge density {edge_density(w_hat):.6g}, inconsistent with p = {float(p):.6g}")
    ip = i_p_graphon(float(p), w_hat)
    if mode == "bound":
        lo, hi = _bound_terms(n, m, partition, a, p, events, ip)
        eps = max(hi / n**2 + ip, -ip - lo / n**2, 0.0)
        flagged = not math.isfinite(eps)
        note = "no edge-count allocation satisfies the events" if flagged else ""
        return BlockEventResult(mode, None, -ip - eps, -ip + eps, ip, eps, flagged, note)
    if mode == "exact":
        if n > exact_max_n:
            raise ValueError(f"exact enumeration is limited to n <= {exact_max_n}")
        logp = _enumerate_block_event(n, m, partition, a, p, events)
    elif mode == "convolution":
        logp = _convolve_block_event(n, m, partition, a, p, events)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    value = logp / n**2
    flagged = not math.isfinite(value)
    note = "event has probability zero at this n" if flagged else ""
    return BlockEventResult(mode, value, None, None, ip, None, flagged, note)


def _block_logpmfs(n, m, partition, a, p, events) -> list:
    """Per-cell log pmfs of the independent Bin(N_ij, p) edge counts,
    restricted (-inf) to counts allowed by the cell event."""
    pf = float(p)
    sz = partition.sizes
    out = []
    for i, j, n_pairs in _cells(partition):
        if n_pairs == 0:
            continue
        lp = binom.logpmf(np.arange(n_pairs + 1), n_pairs, pf)
        allowed = _allowed_counts(i, j, n_pairs, sz, _frac(a[i, j]), p, events)
        out.append(np.where(allowed, lp, -np.inf))
    return out


def _best_allocation(logs: list, m: int) -> float:
    """max sum_b log P(X_b = k_b) over allowed k_b with sum k_b = m.

    Each allowed set is an interval and each log pmf is concave, so greedy
    unit moves in order of marginal gain are optimal.
    """
    lo = [int(np.flatnonzero(np.isfinite(l))[0]) for l in logs]
    hi = [int(np.flatnonzero(np.isfinite(l))[-1]) for l in logs]
    if not sum(lo) <= m <= sum(hi):
        return -math.inf
    k = [min(max(int(np.argmax(l)), a), b) for l, a, b in zip(logs, lo, hi)]
    step = 1 if sum(k) < m else -1
    heap = []

    def push(b):
        nk = k[b] + step
        if lo[b] <= nk <= hi[b]:
            heapq.heappush(heap, (-(logs[b][nk] - logs[b][k[b]]), b))

    for b in range(len(logs)):
        push(b)
    for _ in range(abs(m - sum(k))):
        _, b = heapq.heappop(heap)
        k[b] += step
        push(b)
    return float(sum(l[kb] for l, kb in zip(logs, k)))


def _kl(x: float, p: float) -> float:
    # binomial relative entropy D(x || p) = 2 I_p(x)
    return 2.0 * float(i_p(p, x))


def _bound_terms(n, m, partition, a, p, events, ip):
    """Rigorous (lower, upper) on log P(E1 and E2) and the local-CLT term.

    Upper: Chernoff on every constrained cell, at the integer count
    threshold, plus the exact cost -log P(Bin(N, p) = m) of conditioning on
    the edge count.  Lower: the most likely single allowed allocation of
    cell counts summing to m.
    """
    n_all = n * (n - 1) // 2
    pf = float(p)
    logs = _block_logpmfs(n, m, partition, a, p, events)
    upper = -float(binom.logpmf(m, n_all, pf))
    for l in logs:
        size = l.size - 1
        ok = np.flatnonzero(np.isfinite(l))
        if ok.size == 0:
            return -math.inf, -math.inf
        lo_x, hi_x = ok[0] / size, ok[-1] / size
        if lo_x > pf:
            upper -= size * _kl(lo_x, pf)
        elif hi_x < pf:
            upper -= size * _kl(hi_x, pf)
    lower = _best_allocation(logs, m) - float(binom.logpmf(m, n_all, pf))
    # P(E | S = m) <= 1, and P(E, S = m) <= P(S = m)
    lower = min(lower, 0.0)
    return lower, min(upper, 0.0)


def _enumerate_block_event(n, m, partition, a, p, events) -> float:
    n_all = n * (n - 1) // 2
    pairs = list(itertools.combinations(range(n), 2))
    lab = partition.labels
    sz = partition.sizes
    cells = []
    for i, j, n_pairs in _cells(partition):
        ai = _frac(a[i, j])
        if (ai > p and events in ("both", "upper")) or (ai < p and events in ("both", "lower")):
            mask = 0
            for b, (u, v) in enumerate(pairs):
                if {lab[u], lab[v]} == {i, j}:
                    mask |= 1 << b
            cells.append((np.uint32(mask), _allowed_counts(i, j, n_pairs, sz, ai, p, events)))
    total = math.comb(n_all, m)
    if not cells:
        return 0.0
    count = 0
    chunk = 1 << 22
    for start in range(0, 1 << n_all, chunk):
        masks = np.arange(start, min(1 << n_all, start + chunk), dtype=np.uint32)
        masks = masks[np.bitwise_count(masks) == m]
        ok = np.ones(masks.size, dtype=bool)
        for cm, allowed in cells:
            ok &= allowed[np.bitwise_count(masks & cm)]
        count += int(np.count_nonzero(ok))
    return math.log(count) - math.log(total) if count else -math.inf


def _convolve_block_event(n, m, partition, a, p, events) -> float:
    n_all = n * (n - 1) // 2
    pf = float(p)
    logs = _block_logpmfs(n, m, partition, a, p, events)
    if any(not np.isfinite(l).any() for l in logs):
        return -math.inf
    lo = sum(int(np.flatnonzero(np.isfinite(l))[0]) for l in logs)
    hi = sum(int(np.flatnonzero(np.isfinite(l))[-1]) for l in logs)
    if not lo <= m <= hi:
        return -math.inf

    # exponential tilt centring the total at m keeps the convolution in range
    def tilted_mean(theta):
        tot = 0.0
        for l in logs:
            k = np.arange(l.size)
            z = l + theta * k
            tot += float(np.exp(z - logsumexp(z)) @ k)
        return tot - m

    if lo == hi:
        theta = 0.0
    else:
        a_, b_ = -1.0, 1.0
        while tilted_mean(a_) > 0:
            a_ *= 2
        while tilted_mean(b_) < 0:
            b_ *= 2
        theta = brentq(tilted_mean, a_, b_, xtol=1e-12)
    conv = np.ones(1)
    log_norm = 0.0
    for l in logs:
        k = np.arange(l.size)
        z = l + theta * k
        lz = logsumexp(z)
        conv = np.convolve(conv, np.exp(z - lz))
        log_norm += lz
    if conv[m] <= 0:
        return -math.inf
    log_joint = math.log(conv[m]) + log_norm - theta * m
    return log_joint - float(binom.logpmf(m, n_all, pf))
