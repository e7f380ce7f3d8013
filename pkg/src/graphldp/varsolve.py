"""Numerical solution of the graphon variational problems.

Four problems are supported, all restricted to step graphons on a mesh of
``blocks`` equal blocks:

* ``PHI``        minimise I_p(W) subject to t_H(W) >= r
* ``PSI``        same with the extra constraint ||W||_1 = p
* ``F_ENTROPY``  maximise the entropy h_e(W) subject to ||W||_1 = p, t_H(W) = r
* ``PSI_HAT``    the weighted-graph problem on n vertices (zero diagonal)

The solver is an augmented Lagrangian on the single nonlinear constraint
t_H(W) - r, with a spectral projected-gradient inner loop.  Box and mass
constraints are handled by exact projection.  Work is done in the metric
weighted by cell measure, so gradients are per-cell derivatives and the
mass projection is a uniform water-filling shift.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import xlogy

from .graphon import Motif, StepGraphon, edge_density, equal_mesh, t_density, t_value_and_gradient
from .rates import GRAD_CLAMP, h_e, h_e_graphon, i_p_graphon

FEAS_TOL = 1e-7
KKT_TOL = 1e-6
TIE_TOL = 1e-8


class Kind(str, Enum):
    PHI = "PHI"
    PSI = "PSI"
    F_ENTROPY = "F_ENTROPY"
    PSI_HAT = "PSI_HAT"


class Mode(str, Enum):
    INEQUALITY = "INEQUALITY"
    EQUALITY = "EQUALITY"


class Status(str, Enum):
    CONVERGED = "CONVERGED"
    MAX_ITER = "MAX_ITER"
    INFEASIBLE = "INFEASIBLE"


@dataclass(frozen=True)
class ProblemSpec:
    motif: Motif
    p: float = 0.5
    r: float = 0.0
    kind: Kind = Kind.PSI
    constraint_mode: Mode = Mode.INEQUALITY
    blocks: int = 16
    n: int | None = None
    m: int | None = None
    b: float | None = None
    # PSI_HAT mass normalisation: "density" puts ||W||_1 = p_n,
    # "pairs" makes the off-diagonal average equal p_n
    mass_convention: str = "density"

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "constraint_mode", Mode(self.constraint_mode))
        if self.kind is Kind.PSI_HAT:
            if self.n is None or self.m is None or self.b is None:
                raise ValueError("PSI_HAT needs n, m and b")
            pairs = self.n * (self.n - 1) // 2
            if not 0 < self.m < pairs:
                raise ValueError(f"need 0 < m < C(n,2) = {pairs}")
            if self.b <= 1:
                raise ValueError("b must exceed 1")
            if self.mass_convention not in ("density", "pairs"):
                raise ValueError("mass_convention is 'density' or 'pairs'")
            p_n = self.m / pairs
            object.__setattr__(self, "p", p_n)
            object.__setattr__(self, "blocks", self.n)
            object.__setattr__(self, "r", self.b * p_n ** self.motif.kappa)
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.blocks < 1:
            raise ValueError("blocks must be positive")
        if not 0 <= self.r:
            raise ValueError("r must be nonnegative")

    @property
    def mass_target(self) -> float | None:
        if self.kind is Kind.PHI:
            return None
        if self.kind is Kind.PSI_HAT and self.mass_convention == "pairs":
            return self.p * (self.n - 1) / self.n
        return self.p

    def to_dict(self) -> dict:
        d = {"motif": str(self.motif), "motif_edges": [list(e) for e in self.motif.edges],
             "p": self.p, "r": self.r, "kind": self.kind.value,
             "constraint_mode": self.constraint_mode.value, "blocks": self.blocks}
        if self.kind is Kind.PSI_HAT:
            d.update(n=self.n, m=self.m, b=self.b, mass_convention=self.mass_convention)
        return d


@dataclass
class SolveResult:
    spec: ProblemSpec
    optimizer: StepGraphon
    value: float
    t_residual: float
    mass_residual: float | None
    kkt_residual: float
    status: Status
    restarts: list = field(default_factory=list)
    multiplier: float = 0.0
    iterations: int = 0
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "spec": self.spec.to_dict(),
            "value": self.value,
            "status": self.status.value,
            "optimizer": self.optimizer.to_dict(),
            "residuals": {"t": self.t_residual, "mass": self.mass_residual, "kkt": self.kkt_residual},
            "multiplier": self.multiplier,
            "iterations": self.iterations,
            "restarts": self.restarts,
        }


# ---------------------------------------------------------------------------
# Problem data on the upper-triangular parameter vector
# ---------------------------------------------------------------------------


class _Problem:
    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        k = spec.blocks
        self.k = k
        self.weights = np.full(k, 1.0 / k)
        self.iu, self.ju = np.triu_indices(k)
        off = self.iu != self.ju
        self.c = np.where(off, 2.0, 1.0) / k**2
        self.lo = np.zeros(self.iu.size)
        self.hi = np.ones(self.iu.size)
        if spec.kind is Kind.PSI_HAT:
            self.hi[~off] = 0.0
        self.mass = spec.mass_target
        self.edges = spec.motif.edges
        self.entropy = spec.kind is Kind.F_ENTROPY
        self.equality = spec.constraint_mode is Mode.EQUALITY or self.entropy
        self.fixed = self.lo == self.hi

    def matrix(self, x):
        a = np.empty((self.k, self.k))
        a[self.iu, self.ju] = x
        a[self.ju, self.iu] = x
        return a

    def vector(self, a):
        return np.asarray(a, dtype=float)[self.iu, self.ju]

    def objective(self, x) -> float:
        ent = float(self.c @ (xlogy(x, x) + xlogy(1 - x, 1 - x)))
        if self.entropy:
            return 0.5 * ent
        p = self.spec.p
        lin = float(self.c @ (x * math.log(p) + (1 - x) * math.log1p(-p)))
        return 0.5 * (ent - lin)

    def objective_grad(self, x):
        # per-cell derivative (gradient in the cell-measure metric)
        with np.errstate(divide="ignore"):
            g = 0.5 * (np.log(x) - np.log1p(-x))
        if not self.entropy:
            p = self.spec.p
            g -= 0.5 * (math.log(p) - math.log1p(-p))
        g = np.clip(g, -GRAD_CLAMP, GRAD_CLAMP)
        g[self.fixed] = 0.0
        return g

    def constraint(self, x):
        t, grad = t_value_and_gradient(self.edges, self.matrix(x), self.weights)
        return t - self.spec.r, grad[self.iu, self.ju] / self.c

    def project(self, y):
        y = np.clip(y, self.lo, self.hi) if self.mass is None else water_fill(y, self.c, self.lo, self.hi, self.mass)
        return y

    def graphon(self, x) -> StepGraphon:
        return StepGraphon(self.weights, np.clip(self.matrix(x), 0.0, 1.0))


def water_fill(y, c, lo, hi, s):
    """Weighted projection onto {lo <= x <= hi, c.x = s}: x = clip(y - lam, lo, hi).

    Solved exactly by sweeping the sorted breakpoints of the piecewise
    linear, nonincreasing map lam -> c.clip(y - lam).
    """
    fixed = lo == hi
    s_free = s - float(c[fixed] @ lo[fixed])
    yf, cf, lof, hif = y[~fixed], c[~fixed], lo[~fixed], hi[~fixed]
    out = np.array(lo, dtype=float)
    if yf.size == 0:
        return out
    top = float(cf @ hif)
    bottom = float(cf @ lof)
    if s_free >= top:
        out[~fixed] = hif
        return out
    if s_free <= bottom:
        out[~fixed] = lof
        return out
    a = yf - hif  # below a: pinned at hi
    b = yf - lof  # above b: pinned at lo
    lam = np.concatenate([a, b])
    # deltas of (constant part, slope part) when crossing each breakpoint
    d_const = np.concatenate([-cf * hif + cf * yf, -cf * yf + cf * lof])
    d_slope = np.concatenate([cf, -cf])
    order = np.argsort(lam, kind="stable")
    lam, d_const, d_slope = lam[order], d_const[order], d_slope[order]
    const = top + np.cumsum(d_const)
    slope = np.cumsum(d_slope)
    phi = const - lam * slope
    j = int(np.searchsorted(-phi, -s_free, side="left"))
    # phi[j] <= s_free < phi[j-1]; the map is linear on [lam[j-1], lam[j]]
    if j == 0:
        root = lam[0]
    elif slope[j - 1] <= 0:
        root = lam[j - 1]
    else:
        root = (const[j - 1] - s_free) / slope[j - 1]
    out[~fixed] = np.clip(yf - root, lof, hif)
    return out


# ---------------------------------------------------------------------------
# Augmented Lagrangian with spectral projected gradient
# ---------------------------------------------------------------------------


@dataclass
class _RunOutcome:
    x: np.ndarray
    value: float
    g: float
    lam: float
    kkt: float
    status: Status
    iterations: int
    trace: list


def _lagrangian(prob: _Problem, x, lam, mu, equality):
    f = prob.objective(x)
    g, dg = prob.constraint(x)
    df = prob.objective_grad(x)
    if equality:
        mult = lam - mu * g
        val = f - lam * g + 0.5 * mu * g * g
    else:
        mult = max(0.0, lam - mu * g)
        val = f + (mult * mult - lam * lam) / (2.0 * mu)
    grad = df - mult * dg
    grad[prob.fixed] = 0.0
    return val, grad, g


def _kkt(prob: _Problem, x, grad) -> float:
    return float(np.max(np.abs(prob.project(x - grad) - x)))


def _initial_multiplier(prob: _Problem, x, equality) -> float:
    """Least-squares fit of grad f = lam grad t (+ nu for the mass constraint)
    over the cells strictly inside their box."""
    df = prob.objective_grad(x)
    g, dg = prob.constraint(x)
    free = ~prob.fixed & (x > prob.lo + 1e-9) & (x < prob.hi - 1e-9)
    if not np.any(free):
        return 0.0
    cols = [dg[free]]
    if prob.mass is not None:
        cols.append(np.ones(int(free.sum())))
    sw = np.sqrt(prob.c[free])
    a = np.stack(cols, axis=1) * sw[:, None]
    coef, *_ = np.linalg.lstsq(a, df[free] * sw, rcond=None)
    lam = float(coef[0])
    return lam if equality else max(lam, 0.0)


def _run(prob: _Problem, x0, max_iter=5000, kkt_tol=KKT_TOL, feas_tol=1e-9, patience=10,
         inner_cap=1000) -> _RunOutcome:
    """One augmented-Lagrangian run from ``x0``.

    Converged once the projected Lagrangian gradient (with the first-order
    multiplier estimate) stays below ``kkt_tol`` and the constraint residual
    below ``feas_tol`` for ``patience`` consecutive iterations.
    """
    c = prob.c
    equality = prob.equality
    x = prob.project(x0)
    lam = _initial_multiplier(prob, x, equality)
    mu = 10.0
    trace = []
    it = 0
    streak = 0
    stalls = 0
    viol_prev = math.inf
    inner_tol = 1e-2
    status = Status.MAX_ITER
    kkt = math.inf
    mult = lam
    while it < max_iter and status is not Status.CONVERGED:
        val, grad, g = _lagrangian(prob, x, lam, mu, equality)
        alpha = 1.0
        hist = [val]
        for _ in range(min(inner_cap, max_iter - it)):
            it += 1
            mult = (lam - mu * g) if equality else max(0.0, lam - mu * g)
            kkt = _kkt(prob, x, grad)
            viol = abs(g) if (equality or mult > 0) else max(0.0, -g)
            if kkt < kkt_tol and viol < feas_tol:
                streak += 1
                if streak >= patience:
                    status = Status.CONVERGED
                    break
            else:
                streak = 0
            if kkt < inner_tol and streak == 0:
                break
            d = prob.project(x - alpha * grad) - x
            if not np.any(d):
                break
            gtd = float(c @ (grad * d))
            ref = max(hist[-10:])
            theta = 1.0
            while True:
                xn = x + theta * d
                vn, gn, g_new = _lagrangian(prob, xn, lam, mu, equality)
                if vn <= ref + 1e-4 * theta * gtd or theta < 1e-10:
                    break
                theta *= 0.5
            s = xn - x
            sy = float(c @ (s * (gn - grad)))
            ss = float(c @ (s * s))
            alpha = min(max(ss / sy, 1e-8), 1e4) if sy > 0 else 1e4
            x, val, grad, g = xn, vn, gn, g_new
            hist.append(val)
        if status is Status.CONVERGED:
            break
        g = prob.constraint(x)[0]
        if equality:
            lam = lam - mu * g
            viol = abs(g)
        else:
            lam = max(0.0, lam - mu * g)
            viol = max(0.0, -g) if lam == 0.0 else abs(g)
        trace.append((it, prob.objective(x), g, lam, kkt))
        if viol > feas_tol and viol > 0.25 * viol_prev:
            mu = min(mu * 10.0, 1e12)
        stalls = stalls + 1 if (viol > feas_tol and viol > 0.99 * viol_prev) else 0
        if stalls >= 4 and mu >= 1e6:
            break
        viol_prev = viol
        inner_tol = max(inner_tol * 0.1, kkt_tol * 0.1)
    g = prob.constraint(x)[0]
    return _RunOutcome(x, prob.objective(x), g, mult, kkt, status, it, trace)


# ---------------------------------------------------------------------------
# Starts, reduction, public entry points
# ---------------------------------------------------------------------------


def _starts(prob: _Problem, n_starts: int, seed: int, init=()):
    spec = prob.spec
    k = prob.k
    rng = np.random.default_rng(seed)
    base = spec.p
    if spec.kind is Kind.PHI:
        base = max(spec.p, min(1.0, spec.r) ** (1.0 / max(spec.motif.kappa, 1)))
    out = []
    for w in init:
        out.append(prob.vector(_to_mesh(w, k)))
    fresh = max(n_starts - len(out), 1)
    for i in range(fresh):
        kind = (i - 1) % 3 + 1 if i else 0
        if kind == 0:
            a = np.full((k, k), base)
        elif kind == 1:
            u = rng.standard_normal(k)
            a = base + rng.uniform(0.05, 0.4) * np.outer(u, u) / max(np.max(u**2), 1e-12)
        elif kind == 2:
            j = int(rng.integers(1, k)) if k > 1 else 1
            hub = np.zeros(k, bool)
            hub[rng.permutation(k)[:j]] = True
            a = np.where(np.outer(hub, hub), rng.uniform(0.6, 1.0),
                         np.where(np.outer(~hub, ~hub), rng.uniform(0.0, base), rng.uniform(0.0, 1.0)))
        else:
            a = rng.random((k, k))
        a = 0.5 * (a + a.T)
        out.append(prob.vector(np.clip(a, 0.0, 1.0)))
    return out[: max(n_starts, len(init))]


def _to_mesh(w: StepGraphon, k: int) -> np.ndarray:
    if w.k == k:
        return np.asarray(w.values)
    return equal_mesh(w, k)


def _feasible(prob: _Problem, g: float, feas_tol: float) -> bool:
    if prob.equality:
        return abs(g) <= feas_tol
    return g >= -feas_tol


def _canonical_key(w: StepGraphon):
    m = w.merged(1e-6)
    order = np.lexsort((m.weights, -m.values.sum(axis=1)))
    return (m.k, tuple(np.round(m.values[np.ix_(order, order)], 8).ravel()))


def _worker(args):
    spec, x0, max_iter = args
    return _run(_Problem(spec), x0, max_iter=max_iter)


def default_threads() -> int:
    """Worker count: $GRAPHLDP_THREADS, else the machine's core count."""
    env = os.environ.get("GRAPHLDP_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def solve(spec: ProblemSpec, restarts: int = 32, seed: int = 0, init=(), threads: int | None = None,
          max_iter: int = 5000, feas_tol: float = FEAS_TOL) -> SolveResult:
    """Multi-start solve of any of the four problems."""
    prob = _Problem(spec)
    kappa = spec.motif.kappa
    if spec.kind in (Kind.PHI, Kind.PSI, Kind.F_ENTROPY) and spec.r <= spec.p ** kappa:
        # the constant graphon is the global optimum (constraint inactive)
        if spec.kind is Kind.PHI or spec.constraint_mode is Mode.INEQUALITY or spec.r == spec.p ** kappa:
            return _constant_result(spec)
    if spec.kind is Kind.PHI and spec.r > 1:
        return _infeasible(spec)
    starts = _starts(prob, restarts, seed, init)
    threads = threads or default_threads()
    jobs = [(spec, x0, max_iter) for x0 in starts]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            outcomes = list(ex.map(_worker, jobs))
    else:
        outcomes = [_worker(j) for j in jobs]
    return _reduce(prob, outcomes, feas_tol)


def _reduce(prob: _Problem, outcomes, feas_tol) -> SolveResult:
    sign = -1.0 if prob.entropy else 1.0
    summary = []
    cands = []
    for i, o in enumerate(outcomes):
        ok = _feasible(prob, o.g, feas_tol)
        summary.append({"start": i, "value": sign * o.value, "t_residual": o.g, "kkt": o.kkt,
                        "status": o.status.value if ok else Status.INFEASIBLE.value, "iterations": o.iterations})
        if ok:
            cands.append(o)
    if not cands:
        best = min(outcomes, key=lambda o: abs(min(o.g, 0.0)) if not prob.equality else abs(o.g))
        res = _result(prob, best, Status.INFEASIBLE)
        res.restarts = summary
        return res
    vmin = min(o.value for o in cands)
    near = [o for o in cands if o.value <= vmin + TIE_TOL]
    near.sort(key=lambda o: (_canonical_key(prob.graphon(o.x)), o.value))
    best = near[0]
    res = _result(prob, best, best.status)
    res.restarts = summary
    return res


def _result(prob: _Problem, o: _RunOutcome, status: Status) -> SolveResult:
    spec = prob.spec
    w = prob.graphon(o.x)
    value = h_e_graphon(w) if prob.entropy else i_p_graphon(spec.p, w)
    mass = None if prob.mass is None else edge_density(w) - prob.mass
    return SolveResult(spec=spec, optimizer=w, value=value, t_residual=t_density(spec.motif, w) - spec.r,
                       mass_residual=mass, kkt_residual=o.kkt, status=status, multiplier=o.lam,
                       iterations=o.iterations, trace=o.trace)


def _constant_result(spec: ProblemSpec) -> SolveResult:
    w = StepGraphon.constant(spec.p, spec.blocks)
    value = float(h_e(spec.p)) if spec.kind is Kind.F_ENTROPY else 0.0
    mass = None if spec.kind is Kind.PHI else 0.0
    return SolveResult(spec=spec, optimizer=w, value=value, t_residual=t_density(spec.motif, w) - spec.r,
                       mass_residual=mass, kkt_residual=0.0, status=Status.CONVERGED)


def _infeasible(spec: ProblemSpec) -> SolveResult:
    w = StepGraphon.constant(1.0, spec.blocks)
    return SolveResult(spec=spec, optimizer=w, value=math.inf, t_residual=t_density(spec.motif, w) - spec.r,
                       mass_residual=None, kkt_residual=math.inf, status=Status.INFEASIBLE)


def _expect(spec: ProblemSpec, kind: Kind):
    if spec.kind is not kind:
        raise ValueError(f"expected a {kind.value} problem, got {spec.kind.value}")


def solve_phi(spec: ProblemSpec, **kw) -> SolveResult:
    _expect(spec, Kind.PHI)
    return solve(spec, **kw)


def solve_psi(spec: ProblemSpec, **kw) -> SolveResult:
    _expect(spec, Kind.PSI)
    return solve(spec, **kw)


def solve_f_entropy(spec: ProblemSpec, **kw) -> SolveResult:
    _expect(spec, Kind.F_ENTROPY)
    return solve(spec, **kw)


def solve_psi_hat(spec: ProblemSpec, **kw) -> SolveResult:
    _expect(spec, Kind.PSI_HAT)
    return solve(spec, **kw)


# ---------------------------------------------------------------------------
# Warm-started sweeps
# ---------------------------------------------------------------------------

CURVE_COLUMNS = ["r", "psi", "phi", "F", "t_residual", "mass_residual", "status", "blocks_used"]
AGREE_TOL = 1e-6
JUMP_TOL = 1e-3


@dataclass
class CurvePoint:
    r: float
    psi: SolveResult
    psi_eq: SolveResult | None = None
    phi: SolveResult | None = None
    f: SolveResult | None = None
    left_gap: float | None = None

    @property
    def agree(self) -> bool | None:
        if self.psi_eq is None:
            return None
        return abs(self.psi.value - self.psi_eq.value) <= AGREE_TOL

    @property
    def discontinuity_flag(self) -> bool:
        return self.left_gap is not None and abs(self.left_gap) > JUMP_TOL

    @property
    def blocks_used(self) -> int:
        return self.psi.optimizer.merged(1e-6).k

    def row(self) -> dict:
        return {
            "r": self.r, "psi": self.psi.value,
            "phi": None if self.phi is None else self.phi.value,
            "F": None if self.f is None else self.f.value,
            "t_residual": self.psi.t_residual, "mass_residual": self.psi.mass_residual,
            "status": self.psi.status.value, "blocks_used": self.blocks_used,
        }


@dataclass
class Curve:
    motif: Motif
    p: float
    points: list

    @property
    def r_h_estimate(self) -> float | None:
        """Last grid point at which the psi problem was feasible."""
        ok = [pt.r for pt in self.points if pt.psi.status is not Status.INFEASIBLE]
        return ok[-1] if ok else None

    def to_csv(self) -> str:
        lines = [",".join(CURVE_COLUMNS)]
        for pt in self.points:
            row = pt.row()
            lines.append(",".join(_csv_cell(row[c]) for c in CURVE_COLUMNS))
        return "\n".join(lines) + "\n"


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def evaluate(spec: ProblemSpec, w: StepGraphon) -> SolveResult:
    """SolveResult for a given graphon, with no optimisation."""
    prob = _Problem(spec)
    x = prob.vector(_to_mesh(w, prob.k))
    g = prob.constraint(x)[0]
    o = _RunOutcome(x, prob.objective(x), g, 0.0, math.nan, Status.CONVERGED, 0, [])
    status = Status.CONVERGED if _feasible(prob, g, FEAS_TOL) else Status.INFEASIBLE
    return _result(prob, o, status)


def psi_curve(motif: Motif, p: float, r_grid, blocks: int = 16, restarts: int = 32, seed: int = 0,
              threads: int | None = None, equality: bool = True, phi: bool = True, entropy: bool = True,
              continuity: bool = True, delta: float = 1e-4) -> Curve:
    """psi(p, r) along an ascending grid, warm-starting each point from the
    previous optimizer.

    Alongside each psi (inequality form) the sweep optionally solves the
    equality form, phi (started from the psi optimizer, so phi <= psi), F
    (started from the psi optimizer) and psi at r - delta, whose gap to
    psi(r) is the left-continuity diagnostic.
    """
    r_grid = [float(r) for r in r_grid]
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r_grid must be strictly ascending")
    kw = dict(restarts=restarts, seed=seed, threads=threads)
    points = []
    prev: StepGraphon | None = None
    for r in r_grid:
        spec = ProblemSpec(motif, p, r, Kind.PSI, Mode.INEQUALITY, blocks=blocks)
        init = () if prev is None else (prev,)
        res = solve(spec, init=init, **kw)
        pt = CurvePoint(r, res)
        feasible = res.status is not Status.INFEASIBLE
        if feasible:
            prev = res.optimizer
            warm = (res.optimizer,)
            if equality:
                pt.psi_eq = solve(ProblemSpec(motif, p, r, Kind.PSI, Mode.EQUALITY, blocks=blocks),
                                  init=warm, **kw)
            if phi:
                spec_phi = ProblemSpec(motif, p, r, Kind.PHI, Mode.INEQUALITY, blocks=blocks)
                pt.phi = solve(spec_phi, init=warm, **kw)
                incumbent = evaluate(spec_phi, res.optimizer)
                if incumbent.status is Status.CONVERGED and incumbent.value < pt.phi.value:
                    pt.phi = incumbent
            if entropy:
                pt.f = solve(ProblemSpec(motif, p, r, Kind.F_ENTROPY, Mode.EQUALITY, blocks=blocks),
                             init=warm, **kw)
            if continuity and r - delta > 0:
                left = solve(ProblemSpec(motif, p, r - delta, Kind.PSI, Mode.INEQUALITY, blocks=blocks),
                             init=warm, restarts=max(restarts // 4, 2), seed=seed, threads=threads)
                pt.left_gap = res.value - left.value
        points.append(pt)
    return Curve(motif, p, points)
