"""Step-function graphons, finite graphs, motifs and their densities.

A step graphon is stored as a vector of block measures together with a
symmetric matrix of block values.  Every quantity computed here (edge
density, homomorphism densities, cut norm on a fixed block structure) is
evaluated exactly on that representation.
"""
from __future__ import annotations

import itertools
import json
import math
import string
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

K_EXACT = 22
HARD_CAP = 64
N_RESTARTS = 50
MAX_REFINED_BLOCKS = 512
EXACT_PERMUTATION_BLOCKS = 8


class RefinementOverflow(ValueError):
    """Raised when a common refinement needs more blocks than allowed."""


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StepKernel:
    """Symmetric block-constant kernel on [0,1]^2 with arbitrary real values."""

    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        if w.size == 0:
            raise ValueError("need at least one block")
        if v.shape != (w.size, w.size):
            raise ValueError(f"values shape {v.shape} does not match {w.size} blocks")
        if np.any(w <= 0):
            raise ValueError("block measures must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"block measures sum to {w.sum()!r}, not 1")
        if not np.array_equal(v, v.T):
            if np.max(np.abs(v - v.T)) > 1e-12:
                raise ValueError("values must be symmetric")
            v = 0.5 * (v + v.T)
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.weights.size

    @cached_property
    def uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def permuted(self, order: Sequence[int]):
        order = np.asarray(order)
        return type(self)(self.weights[order], self.values[np.ix_(order, order)])

    def __sub__(self, other: "StepKernel") -> "StepKernel":
        w, i1, i2 = common_refinement(self.weights, other.weights)
        return StepKernel(w, self.values[np.ix_(i1, i1)] - other.values[np.ix_(i2, i2)])

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "values": self.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict):
        return cls(d["weights"], d["values"])

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


class StepGraphon(StepKernel):
    """Step kernel with values in [0, 1]."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("graphon values must lie in [0, 1]")

    @classmethod
    def constant(cls, p: float, k: int = 1) -> "StepGraphon":
        return cls(np.full(k, 1.0 / k), np.full((k, k), float(p)))

    @classmethod
    def uniform_blocks(cls, values) -> "StepGraphon":
        values = np.asarray(values, dtype=float)
        k = values.shape[0]
        return cls(np.full(k, 1.0 / k), values)

    def merged(self, tol: float = 1e-9) -> "StepGraphon":
        """Merge blocks whose rows agree within ``tol`` (twin blocks)."""
        k = self.k
        label = -np.ones(k, dtype=int)
        reps: list[int] = []
        for a in range(k):
            for ci, b in enumerate(reps):
                if np.max(np.abs(self.values[a] - self.values[b])) <= tol:
                    label[a] = ci
                    break
            else:
                label[a] = len(reps)
                reps.append(a)
        w = np.array([self.weights[label == c].sum() for c in range(len(reps))])
        v = self.values[np.ix_(reps, reps)]
        return StepGraphon(w / w.sum(), np.clip(v, 0.0, 1.0))

    def refined(self, factor: int) -> "StepGraphon":
        """Split every block into ``factor`` equal sub-blocks."""
        idx = np.repeat(np.arange(self.k), factor)
        return StepGraphon(np.repeat(self.weights / factor, factor) / 1.0,
                           self.values[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class FiniteGraph:
    """Simple graph on vertices 0..n-1."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            norm.add((u, v) if u < v else (v, u))
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def m(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        return isinstance(other, FiniteGraph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        if self.edges:
            e = np.array(sorted(self.edges))
            a[e[:, 0], e[:, 1]] = 1
            a[e[:, 1], e[:, 0]] = 1
        a.setflags(write=False)
        return a

    @classmethod
    def from_adjacency(cls, a) -> "FiniteGraph":
        a = np.asarray(a)
        iu, ju = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))

    @classmethod
    def complete(cls, n: int) -> "FiniteGraph":
        return cls(n, frozenset(itertools.combinations(range(n), 2)))

    def to_edgelist(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines += [f"{u} {v}" for u, v in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "FiniteGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        n, m = int(rows[0][0]), int(rows[0][1])
        edges = [(int(r[0]), int(r[1])) for r in rows[1:]]
        g = cls(n, frozenset(edges))
        if g.m != m or len(edges) != m:
            raise ValueError(f"header declares {m} edges, found {len(edges)}")
        return g


PRESETS = {
    "edge": (2, ((0, 1),)),
    "triangle": (3, ((0, 1), (1, 2), (0, 2))),
    "c4": (4, ((0, 1), (1, 2), (2, 3), (0, 3))),
    "k4": (4, tuple(itertools.combinations(range(4), 2))),
    "path2": (3, ((0, 1), (1, 2))),
}


@dataclass(frozen=True)
class Motif:
    """Small simple graph H used as a test pattern; kappa is its edge count."""

    k: int
    edges: tuple
    name: str = ""

    def __post_init__(self):
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v or not (0 <= u < self.k and 0 <= v < self.k):
                raise ValueError(f"bad motif edge ({u}, {v})")
            norm.append((min(u, v), max(u, v)))
        if len(set(norm)) != len(norm):
            raise ValueError("motif has repeated edges")
        if self.k > 26:
            raise ValueError("motifs are limited to 26 vertices")
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def kappa(self) -> int:
        return len(self.edges)

    @classmethod
    def preset(cls, name: str) -> "Motif":
        try:
            k, edges = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown motif preset {name!r}; choose from {sorted(PRESETS)}") from None
        return cls(k, edges, name)

    @classmethod
    def parse(cls, spec: str) -> "Motif":
        """Preset name, or an edge list such as ``"0-1,1-2,2-0"``."""
        spec = spec.strip()
        if spec in PRESETS:
            return cls.preset(spec)
        try:
            edges = [tuple(int(x) for x in tok.split("-")) for tok in spec.split(",") if tok]
        except ValueError:
            raise ValueError(f"unknown motif preset {spec!r}") from None
        if not edges or any(len(e) != 2 for e in edges):
            raise ValueError(f"cannot parse motif {spec!r}")
        k = max(max(e) for e in edges) + 1
        return cls(k, tuple(edges), spec)

    def relabeled(self, perm: Sequence[int]) -> "Motif":
        return Motif(self.k, tuple((perm[u], perm[v]) for u, v in self.edges), self.name)

    def __str__(self):
        return self.name or ",".join(f"{u}-{v}" for u, v in self.edges)


# ---------------------------------------------------------------------------
# Embedding and densities
# ---------------------------------------------------------------------------


def embed(g: FiniteGraph) -> StepGraphon:
    """W_G: n equal blocks, value 1 on edge cells, 0 elsewhere (diagonal 0)."""
    if g.n < 1:
        raise ValueError("need at least one vertex")
    return StepGraphon(np.full(g.n, 1.0 / g.n), g.adjacency.astype(float))


def edge_density(w: StepKernel) -> float:
    return float(w.weights @ w.values @ w.weights)


@lru_cache(maxsize=None)
def _einsum_spec(edges: tuple, k: int, weighted: bool) -> str:
    letters = string.ascii_letters[:k]
    ops = [letters[u] + letters[v] for u, v in edges]
    if weighted:
        ops += list(letters)
    return ",".join(ops)


_PATHS: dict = {}


def _contract(spec: str, operands: list, out: str = "") -> np.ndarray:
    key = (spec, out, tuple(o.shape for o in operands))
    path = _PATHS.get(key)
    if path is None:
        path = np.einsum_path(spec + "->" + out, *operands, optimize="optimal")[0]
        _PATHS[key] = path
    return np.einsum(spec + "->" + out, *operands, optimize=path)


def _hom_sum(edges: tuple, k_h: int, values: np.ndarray, weights: np.ndarray | None) -> float:
    # sum over maps V(H) -> blocks of prod(values) [* prod(weights)]
    used = {v for e in edges for v in e}
    isolated = k_h - len(used)
    if not edges:
        return 1.0 if weights is not None else float(values.shape[0]) ** k_h
    # relabel used vertices contiguously; isolated vertices factor out
    relabel = {v: i for i, v in enumerate(sorted(used))}
    e2 = tuple((relabel[u], relabel[v]) for u, v in edges)
    spec = _einsum_spec(e2, len(used), weights is not None)
    ops = [values] * len(e2)
    if weights is not None:
        ops += [weights] * len(used)
    total = float(_contract(spec, ops))
    if weights is None:
        total *= float(values.shape[0]) ** isolated
    return total


def t_density(h: Motif, w: StepKernel) -> float:
    """Homomorphism density t_H(W), evaluated exactly on the block structure."""
    if w.uniform:
        # sum of products first, then one division; keeps hom/n^k exact for embeddings
        return _hom_sum(h.edges, h.k, w.values, None) / float(w.k) ** h.k
    return _hom_sum(h.edges, h.k, w.values, w.weights)


def hom_count(h: Motif, g: FiniteGraph) -> int:
    """Number of homomorphisms H -> G (non-injective maps included)."""
    a = g.adjacency
    used = {v for e in h.edges for v in e}
    isolated = h.k - len(used)
    if not h.edges:
        return g.n ** h.k
    cyc = _cycle_length(h)
    if cyc is not None:
        total = int(np.trace(np.linalg.matrix_power(a, cyc)))
    else:
        relabel = {v: i for i, v in enumerate(sorted(used))}
        e2 = tuple((relabel[u], relabel[v]) for u, v in h.edges)
        total = int(_contract(_einsum_spec(e2, len(used), False), [a] * len(e2)))
    return total * g.n ** isolated


def _cycle_length(h: Motif) -> int | None:
    used = {v for e in h.edges for v in e}
    if len(h.edges) < 3 or len(used) != len(h.edges):
        return None
    deg = {v: 0 for v in used}
    adj: dict = {v: [] for v in used}
    for u, v in h.edges:
        deg[u] += 1
        deg[v] += 1
        adj[u].append(v)
        adj[v].append(u)
    if any(d != 2 for d in deg.values()):
        return None
    start = next(iter(used))
    seen, stack = {start}, [start]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(h.edges) if len(seen) == len(used) else None


def t_density_graph(h: Motif, g: FiniteGraph) -> float:
    """t_H(G) = hom(H, G) / n^{|V(H)|}."""
    return hom_count(h, g) / float(g.n) ** h.k


def t_gradient(h: Motif, w: StepKernel) -> np.ndarray:
    """Gradient of t_H in the free symmetric block values.

    Entry (a, b) is the derivative with respect to the single parameter
    shared by cells (a, b) and (b, a).
    """
    return t_value_and_gradient(h.edges, w.values, w.weights)[1]


def t_value_and_gradient(edges: tuple, values: np.ndarray, weights: np.ndarray):
    """(t_H, symmetric-parameter gradient) for raw block arrays."""
    k = values.shape[0]
    if not edges:
        return 1.0, np.zeros((k, k))
    used = sorted({v for e in edges for v in e})
    relabel = {v: i for i, v in enumerate(used)}
    e2 = tuple((relabel[u], relabel[v]) for u, v in edges)
    if _is_triangle(e2):
        xd = values * weights
        xdx = xd @ values
        t = float(np.einsum("ab,ba,a,b->", xdx, values, weights, weights))
        full = 3.0 * np.outer(weights, weights) * xdx
    else:
        letters = string.ascii_letters[: len(used)]
        full = np.zeros((k, k))
        for idx, (u, v) in enumerate(e2):
            others = e2[:idx] + e2[idx + 1:]
            ops_spec = [letters[a] + letters[b] for a, b in others] + list(letters)
            ops = [values] * len(others) + [weights] * len(used)
            full += _contract(",".join(ops_spec), ops, letters[u] + letters[v])
        t = _hom_sum(edges, len(used), values, weights)
    grad = full + full.T
    grad[np.diag_indices(k)] = np.diag(full)
    return t, grad


def _is_triangle(e2: tuple) -> bool:
    return len(e2) == 3 and sorted(e2) == [(0, 1), (0, 2), (1, 2)]


# ---------------------------------------------------------------------------
# Refinements, L1 and cut norms
# ---------------------------------------------------------------------------


def common_refinement(w1, w2, tol: float = 1e-12):
    """Common refinement of two block-measure vectors.

    Returns the refined measures and, for each refined block, the index of
    the block it came from in each input.
    """
    c1 = np.cumsum(w1)[:-1]
    c2 = np.cumsum(w2)[:-1]
    cuts = np.unique(np.concatenate([c1, c2]))
    if cuts.size:
        keep = np.concatenate([[True], np.diff(cuts) > tol])
        cuts = cuts[keep]
    edges = np.concatenate([[0.0], cuts, [1.0]])
    widths = np.diff(edges)
    good = widths > tol
    edges_l = edges[:-1][good]
    widths = widths[good]
    mids = edges_l + widths / 2
    i1 = np.minimum(np.searchsorted(np.cumsum(w1), mids), len(w1) - 1)
    i2 = np.minimum(np.searchsorted(np.cumsum(w2), mids), len(w2) - 1)
    return widths / widths.sum(), i1, i2


def l1_distance(w1: StepKernel, w2: StepKernel) -> float:
    d = w1 - w2
    return float(d.weights @ np.abs(d.values) @ d.weights)


def _subset_bits(start: int, stop: int, k: int) -> np.ndarray:
    masks = np.arange(start, stop, dtype=np.int64)
    return ((masks[:, None] >> np.arange(k)) & 1).astype(float)


class CutNormResult(NamedTuple):
    value: float
    exact: bool
    rows: np.ndarray
    cols: np.ndarray


def cut_norm_search(kernel: StepKernel, k_exact: int = K_EXACT, hard_cap: int = HARD_CAP,
                    restarts: int = N_RESTARTS, seed: int = 0) -> CutNormResult:
    """Cut norm of a step kernel with a witnessing pair of block sets.

    Exact by scanning all row subsets when ``k <= k_exact``.  Above that an
    alternating local search is used and the value is only a lower bound.
    """
    k = kernel.k
    m = kernel.values * np.outer(kernel.weights, kernel.weights)
    if k <= k_exact:
        return _cut_norm_exact(m)
    if k > hard_cap:
        raise ValueError(f"{k} blocks exceed the heuristic cut-norm cap of {hard_cap}")
    return _cut_norm_alternating(m, restarts, seed)


def cut_norm(kernel: StepKernel, **kw) -> float:
    return cut_norm_search(kernel, **kw).value


def _cut_norm_exact(m: np.ndarray) -> CutNormResult:
    k = m.shape[0]
    best, best_s, best_sign = -1.0, 0, 1.0
    chunk = 1 << 15
    total = 1 << k
    for start in range(0, total, chunk):
        bits = _subset_bits(start, min(total, start + chunk), k)
        cols = bits @ m
        pos = np.where(cols > 0, cols, 0.0).sum(axis=1)
        neg = -np.where(cols < 0, cols, 0.0).sum(axis=1)
        ip, ineg = int(np.argmax(pos)), int(np.argmax(neg))
        if pos[ip] > best:
            best, best_s, best_sign = float(pos[ip]), start + ip, 1.0
        if neg[ineg] > best:
            best, best_s, best_sign = float(neg[ineg]), start + ineg, -1.0
    rows = ((best_s >> np.arange(k)) & 1).astype(bool)
    colsum = rows.astype(float) @ m
    cols = colsum * best_sign > 0
    return CutNormResult(max(best, 0.0), True, rows, cols)


def _cut_norm_alternating(m: np.ndarray, restarts: int, seed: int, max_iter: int = 100) -> CutNormResult:
    k = m.shape[0]
    rng = np.random.default_rng(seed)
    best = CutNormResult(0.0, False, np.zeros(k, bool), np.zeros(k, bool))
    for sign in (1.0, -1.0):
        ms = sign * m
        u = rng.random((k, restarts)) < 0.5
        u[:, 0] = True
        val = np.full(restarts, -np.inf)
        for _ in range(max_iter):
            v = (ms.T @ u) > 0
            u_new = (ms @ v) > 0
            new_val = np.einsum("ir,ir->r", u_new.astype(float), ms @ v)
            if np.all(new_val <= val + 1e-15):
                break
            u, val = u_new, new_val
        v = (ms.T @ u) > 0
        val = np.einsum("ir,ir->r", u.astype(float), ms @ v)
        r = int(np.argmax(val))
        if val[r] > best.value:
            best = CutNormResult(float(val[r]), False, u[:, r].copy(), v[:, r].copy())
    return best


# ---------------------------------------------------------------------------
# Cut distance
# ---------------------------------------------------------------------------


class CutDistanceResult(NamedTuple):
    value: float
    exact: bool
    permutation: np.ndarray
    blocks: int

    def __float__(self):
        return self.value


def _mesh_size(weights: Iterable[np.ndarray], cap: int) -> int:
    lcm = 1
    for w in weights:
        for c in np.cumsum(w)[:-1]:
            fr = Fraction(float(c)).limit_denominator(cap)
            if abs(float(fr) - c) > 1e-10:
                raise RefinementOverflow(f"block boundary {c} is not a fraction with denominator <= {cap}")
            lcm = lcm * fr.denominator // math.gcd(lcm, fr.denominator)
            if lcm > cap:
                raise RefinementOverflow(f"equal-measure refinement needs more than {cap} blocks")
    return lcm


def equal_mesh(w: StepKernel, size: int) -> np.ndarray:
    """Values of ``w`` on ``size`` equal-measure blocks."""
    mids = (np.arange(size) + 0.5) / size
    idx = np.minimum(np.searchsorted(np.cumsum(w.weights), mids), w.k - 1)
    return w.values[np.ix_(idx, idx)]


def _degree_order(v: np.ndarray) -> np.ndarray:
    return np.lexsort((np.arange(v.shape[0]), -v.sum(axis=1)))


def cut_distance(w1: StepKernel, w2: StepKernel, max_blocks: int = MAX_REFINED_BLOCKS,
                 anneal_steps: int = 300, seed: int = 0, merge: bool = True) -> CutDistanceResult:
    """Upper bound on the cut distance via block permutations of a common mesh.

    Both graphons are refined to a common mesh of equal-measure blocks and
    ``||W1 - W2^sigma||_box`` is minimised over mesh permutations sigma.
    The search is exhaustive for at most 8 mesh blocks; otherwise it starts
    from the degree-sorted alignment and anneals over transpositions.
    """
    if merge and isinstance(w1, StepGraphon) and isinstance(w2, StepGraphon):
        w1, w2 = w1.merged(), w2.merged()
    size = _mesh_size([w1.weights, w2.weights], max_blocks)
    v1 = equal_mesh(w1, size)
    v2 = equal_mesh(w2, size)
    weights = np.full(size, 1.0 / size)

    def cost(perm):
        d = StepKernel(weights, v1 - v2[np.ix_(perm, perm)])
        return cut_norm_search(d, hard_cap=max_blocks, restarts=16).value

    if size <= EXACT_PERMUTATION_BLOCKS:
        best_val, best_perm = np.inf, None
        for perm in itertools.permutations(range(size)):
            perm = np.array(perm)
            c = cost(perm)
            if c < best_val - 1e-15:
                best_val, best_perm = c, perm
        return CutDistanceResult(best_val, True, best_perm, size)

    # sigma maps W1 mesh block i to W2 mesh block perm[i]
    perm = np.empty(size, dtype=int)
    perm[_degree_order(v1)] = _degree_order(v2)
    rng = np.random.default_rng(seed)
    cur = cost(perm)
    best_val, best_perm = cur, perm.copy()
    temp0 = max(cur, 1e-6) * 0.05
    for step in range(anneal_steps):
        if best_val == 0.0:
            break
        i, j = rng.choice(size, 2, replace=False)
        cand = perm.copy()
        cand[i], cand[j] = cand[j], cand[i]
        c = cost(cand)
        temp = temp0 * (1.0 - step / anneal_steps) + 1e-12
        if c <= cur or rng.random() < math.exp(-(c - cur) / temp):
            perm, cur = cand, c
            if c < best_val:
                best_val, best_perm = c, cand.copy()
    exact = size <= K_EXACT and best_val == 0.0
    return CutDistanceResult(best_val, exact, best_perm, size)
