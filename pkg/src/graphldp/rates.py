"""Rate functions and entropies (natural logarithms throughout)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .graphon import StepKernel

GRAD_CLAMP = 50.0


@dataclass(frozen=True)
class RateParams:
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie strictly inside (0, 1), got {self.p}")


def _p(params) -> float:
    return params.p if isinstance(params, RateParams) else RateParams(float(params)).p


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise ValueError("argument must lie in [0, 1]")
    return x


def i_p(params, x):
    """I_p(x) = x/2 log(x/p) + (1-x)/2 log((1-x)/(1-p)), with 0 log 0 = 0.

    Vectorised over ``x``.
    """
    p = _p(params)
    x = _check_unit(x)
    out = 0.5 * (xlogy(x, x) - x * np.log(p) + xlogy(1 - x, 1 - x) - (1 - x) * np.log1p(-p))
    # rounding can leave tiny negatives near x = p
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def i_p_scalar(params, x: float) -> float:
    return float(i_p(params, x))


def h_e(x):
    """Natural-base entropy -(x log x + (1-x) log(1-x)) / 2."""
    x = _check_unit(x)
    out = -0.5 * (xlogy(x, x) + xlogy(1 - x, 1 - x))
    return float(out) if out.ndim == 0 else out


def i_p_graphon(params, w: StepKernel) -> float:
    return float(w.weights @ i_p(params, w.values) @ w.weights)


def h_e_graphon(w: StepKernel) -> float:
    return float(w.weights @ h_e(w.values) @ w.weights)


def di_p(params, x):
    """Derivative of I_p, clipped to +-GRAD_CLAMP (it diverges at 0 and 1)."""
    p = _p(params)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        d = 0.5 * (np.log(x) - np.log1p(-x) - np.log(p) + np.log1p(-p))
    return np.clip(d, -GRAD_CLAMP, GRAD_CLAMP)


def dh_e(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        d = -0.5 * (np.log(x) - np.log1p(-x))
    return np.clip(d, -GRAD_CLAMP, GRAD_CLAMP)


def _pair_measure(w: StepKernel) -> np.ndarray:
    c = 2.0 * np.outer(w.weights, w.weights)
    c[np.diag_indices(w.k)] /= 2.0
    return c


def i_p_gradient(params, w: StepKernel) -> np.ndarray:
    """Gradient of I_p(W) in the free symmetric block values (same pairing as t_gradient)."""
    return di_p(params, w.values) * _pair_measure(w)


def h_e_gradient(w: StepKernel) -> np.ndarray:
    return dh_e(w.values) * _pair_measure(w)
