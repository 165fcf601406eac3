"""Model-averaged tail-area (MATA) confidence intervals.

The interval's endpoints are the solutions of

    h(lower) = 1 - alpha/2      h(upper) = alpha/2

where ``h(z)`` is the weighted average, over the candidate models, of the
t tail areas of ``(a @ beta_hat_K - z) / (s_K sqrt(v_K))``.  For a fixed
dataset ``h`` is continuous and strictly decreasing from 1 to 0, so both
roots exist and are unique; they are located by bracket expansion from
the weighted center followed by safeguarded secant/bisection steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from .errors import BracketFailure, DegenerateFit
from .linreg import (
    DesignStats,
    ModelFit,
    ModelSubset,
    RegressionProblem,
    all_subsets,
    fit_family,
)
from .weights import WeightSpec, model_weights

_H_TOL = 1e-12
_WIDTH_TOL_FACTOR = 1e-12
_MAX_BRACKET_DOUBLINGS = 100


@dataclass(frozen=True)
class MataRequest:
    """Inputs for one interval computation.

    ``family`` defaults to all subsets of the droppable columns; it must
    contain the full model and hold distinct members.  ``alpha`` is the
    two-sided miss probability, restricted to (0, 0.5].
    """

    prob: RegressionProblem
    spec: WeightSpec
    alpha: float = 0.05
    family: tuple[ModelSubset, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError("alpha must lie in (0, 0.5]")
        if self.family is not None:
            fam = tuple(self.family)
            if ModelSubset(0) not in fam:
                raise ValueError("family must contain the full model")
            if len(set(fam)) != len(fam):
                raise ValueError("family members must be distinct")
            object.__setattr__(self, "family", fam)

    def resolved_family(self) -> list[ModelSubset]:
        if self.family is None:
            return all_subsets(self.prob.p, self.prob.q)
        return list(self.family)


@dataclass(frozen=True)
class MataInterval:
    """A solved interval with solver diagnostics attached."""

    lower: float
    upper: float
    weights_used: dict[ModelSubset, float]
    h_residuals: tuple[float, float]


class _TailAreaSystem:
    """Vectorized h(z) for a fixed dataset, family and weights."""

    def __init__(self, fits: dict[ModelSubset, ModelFit], weights, a: np.ndarray):
        subsets = sorted(fits)
        self.w = np.array([weights[K] for K in subsets])
        self.theta = np.array([float(a @ fits[K].beta_hat) for K in subsets])
        scale2 = np.array([fits[K].s2 * fits[K].v for K in subsets])
        if np.any(scale2 <= 0.0):
            raise DegenerateFit("zero residual scale: tail areas undefined")
        self.scale = np.sqrt(scale2)
        self.df = np.array([float(fits[K].df) for K in subsets])

    def h(self, z: float) -> float:
        return float(np.sum(self.w * stdtr(self.df, (self.theta - z) / self.scale)))

    @property
    def center(self) -> float:
        return float(np.sum(self.w * self.theta))

    @property
    def step(self) -> float:
        return float(self.scale.max())

    def solve(self, target: float) -> tuple[float, float]:
        """Root of h(z) = target; returns (z, |h(z) - target|)."""
        lo, hi = self._bracket(target)
        # h decreasing: f(lo) = h(lo) - target >= 0 >= f(hi).
        flo, fhi = self.h(lo) - target, self.h(hi) - target
        width_tol = _WIDTH_TOL_FACTOR * self.step
        z, fz = lo, flo
        for _ in range(256):
            if hi - lo <= max(width_tol, 4.0 * np.spacing(max(abs(lo), abs(hi)))) and abs(fz) <= _H_TOL:
                break
            if fhi != flo:
                z = lo + (hi - lo) * flo / (flo - fhi)
            else:
                z = 0.5 * (lo + hi)
            margin = 0.05 * (hi - lo)
            if not lo + margin <= z <= hi - margin:
                z = 0.5 * (lo + hi)
            fz = self.h(z) - target
            if fz > 0.0:
                lo, flo = z, fz
            elif fz < 0.0:
                hi, fhi = z, fz
            else:
                lo = hi = z
        return z, abs(fz)

    def _bracket(self, target: float) -> tuple[float, float]:
        c, s = self.center, self.step
        for _ in range(_MAX_BRACKET_DOUBLINGS):
            if self.h(c - s) >= target >= self.h(c + s):
                return c - s, c + s
            s *= 2.0
        raise BracketFailure(f"no bracket for tail target {target} after doublings")


def h_value(
    z: float,
    req: MataRequest,
    fits: dict[ModelSubset, ModelFit],
    weights: dict[ModelSubset, float],
) -> float:
    """Weighted average of per-model t tail areas at the point ``z``."""
    return _TailAreaSystem(fits, weights, req.prob.a).h(z)


def solve_interval(
    req: MataRequest,
    fits: dict[ModelSubset, ModelFit] | None = None,
    weights: dict[ModelSubset, float] | None = None,
    stats: DesignStats | None = None,
) -> MataInterval:
    """Solve the two tail-area equations for the interval endpoints.

    ``fits``/``weights`` may be supplied to reuse precomputations (they
    are recomputed from the request otherwise); injected weights make it
    possible to study degenerate mixtures.
    """
    if fits is None:
        fits = fit_family(req.prob, req.resolved_family(), stats=stats)
    if weights is None:
        rss_full = fits[ModelSubset(0)].rss
        if rss_full <= 0.0:
            raise DegenerateFit("zero residual sum of squares")
        weights = model_weights(fits, rss_full, req.spec)
    system = _TailAreaSystem(fits, weights, req.prob.a)
    lower, res_lo = system.solve(1.0 - req.alpha / 2.0)
    upper, res_up = system.solve(req.alpha / 2.0)
    if lower > upper:
        raise BracketFailure("endpoints crossed; h is not behaving monotonically")
    return MataInterval(
        lower=lower,
        upper=upper,
        weights_used=dict(weights),
        h_residuals=(res_lo, res_up),
    )
