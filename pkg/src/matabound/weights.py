"""Data-based model weights.

The weight on a candidate model is driven by a kernel ``r(x, k)`` applied
to the scaled restriction statistic ``x = u_K / rss`` and the number of
zeroed coefficients ``k = |K|``:

    w(empty) = 1 / (1 + sum_L r(u_L / rss, |L|))
    w(K)     = r(u_K / rss, |K|) / (same denominator)

Admissible kernels are positive, continuous and decreasing in ``x`` with
limit 0 (condition C1), and nondecreasing in ``k`` (condition C2).  The
information-criterion family uses

    r(x, k) = exp(d * k / 2) / (1 + x)^(n/2)

which makes ``w(K)`` proportional to ``exp(-GIC(K)/2)`` with
``GIC(K) = n ln(rss_K) + d (p - |K|)``; ``d = 2`` is AIC, ``d = ln n``
BIC.  Weights are always computed from the ``u_K / rss`` ratios in log
space, never from raw ``exp(-GIC/2)``, to dodge overflow when
``n ln(rss_K)`` is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import DegenerateFit, InvalidKernel
from .linreg import ModelFit, ModelSubset

# Probe grids for the C1/C2 admissibility checks on custom kernels.
_C1_X_GRID = np.concatenate(([0.0], np.geomspace(1e-6, 1e6, 60)))
_C1_DECAY_FACTOR = 1e-6
_C2_X_GRID = np.geomspace(1e-3, 1e3, 13)


@dataclass(frozen=True)
class WeightSpec:
    """Weight kernel selection: information-criterion or custom.

    Use the constructors :meth:`gic`, :meth:`aic`, :meth:`bic` or
    :meth:`custom`; custom kernels are probed for C1/C2 at registration
    and rejected loudly if they fail.
    """

    n: int
    d: float | None = None
    kernel: Callable[[float, int], float] | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("sample size n must be at least 2")
        if (self.d is None) == (self.kernel is None):
            raise ValueError("specify exactly one of d (GIC) or kernel (custom)")
        if self.d is not None and self.d < 0:
            raise ValueError("penalty constant d must be nonnegative")

    @classmethod
    def gic(cls, n: int, d: float) -> "WeightSpec":
        return cls(n=n, d=float(d))

    @classmethod
    def aic(cls, n: int) -> "WeightSpec":
        return cls(n=n, d=2.0)

    @classmethod
    def bic(cls, n: int) -> "WeightSpec":
        return cls(n=n, d=math.log(n))

    @classmethod
    def custom(cls, n: int, kernel: Callable[[float, int], float], k_max: int) -> "WeightSpec":
        """Register a custom kernel after probing conditions C1 and C2."""
        probe_kernel_conditions(kernel, k_max)
        return cls(n=n, kernel=kernel)

    def log_kernel(self, x: np.ndarray | float, k: int) -> np.ndarray | float:
        """log r(x, k); vectorized over x."""
        if self.d is not None:
            return 0.5 * self.d * k - 0.5 * self.n * np.log1p(x)
        vals = np.asarray(
            [self.kernel(float(xi), k) for xi in np.atleast_1d(np.asarray(x, dtype=float))]
        )
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise InvalidKernel(f"kernel returned a non-positive or non-finite value at k={k}")
        out = np.log(vals)
        return out if np.ndim(x) else float(out[0])


def probe_kernel_conditions(kernel: Callable[[float, int], float], k_max: int) -> None:
    """Reject kernels that fail the C1 (decay in x) or C2 (growth in k) probes.

    C1: for each k, values on an increasing x-grid spanning [0, 1e6] must be
    positive, finite, nonincreasing, and decay by a factor of 1e6 overall.
    C2: for each probe x, values must be nondecreasing in k.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    for k in range(1, k_max + 1):
        vals = np.array([kernel(float(x), k) for x in _C1_X_GRID])
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise InvalidKernel(f"C1 probe: non-positive or non-finite value at k={k}")
        if np.any(np.diff(vals) > 0.0):
            raise InvalidKernel(f"C1 probe: kernel is not nonincreasing in x at k={k}")
        if not vals[-1] < vals[0] * _C1_DECAY_FACTOR:
            raise InvalidKernel(f"C1 probe: kernel does not decay to 0 in x at k={k}")
    if k_max > 1:
        for x in _C2_X_GRID:
            vals = np.array([kernel(float(x), k) for k in range(1, k_max + 1)])
            if np.any(np.diff(vals) < 0.0):
                raise InvalidKernel(f"C2 probe: kernel not nondecreasing in k at x={x:g}")


def gic(rss_k: float, card_k: int, p: int, spec: WeightSpec) -> float:
    """Generalized information criterion ``n ln(rss_K) + d (p - |K|)``."""
    if spec.d is None:
        raise ValueError("gic requires an information-criterion WeightSpec")
    if rss_k < 0:
        raise ValueError("rss must be nonnegative")
    if rss_k == 0.0:
        raise DegenerateFit("perfect fit: GIC diverges to -inf")
    return spec.n * math.log(rss_k) + spec.d * (p - card_k)


def model_weights(
    fits: dict[ModelSubset, ModelFit],
    rss_full: float,
    spec: WeightSpec,
) -> dict[ModelSubset, float]:
    """Normalized data-based weights over a model family.

    ``fits`` must contain the full model (empty subset).  The returned
    weights sum to 1; summation is numpy pairwise over mask-ordered terms,
    so the result is deterministic for a given family.
    """
    if ModelSubset(0) not in fits:
        raise ValueError("family must contain the full model (empty subset)")
    if rss_full <= 0.0:
        raise DegenerateFit("rss must be positive to form weight ratios")
    subsets = sorted(fits)
    nonempty = [K for K in subsets if K.mask]
    if not nonempty:
        return {ModelSubset(0): 1.0}
    x = np.array([fits[K].u for K in nonempty]) / rss_full
    if np.any(x < 0.0):
        raise ValueError("negative restriction statistic u_K")
    card = np.array([K.cardinality for K in nonempty])
    if spec.d is not None:
        log_r = 0.5 * spec.d * card - 0.5 * spec.n * np.log1p(x)
    else:
        log_r = np.array(
            [spec.log_kernel(float(xi), int(k)) for xi, k in zip(x, card)]
        )
    if not np.all(np.isfinite(log_r)):
        raise InvalidKernel("kernel produced a non-finite log value")
    # Shift so the largest term is 1 before summing; exact normalization.
    shift = max(0.0, float(log_r.max()))
    terms = np.exp(log_r - shift)
    denom = math.exp(-shift) + float(np.sum(terms))
    out = {ModelSubset(0): math.exp(-shift) / denom}
    for K, t in zip(nonempty, terms):
        out[K] = float(t) / denom
    return dict(sorted(out.items()))


def w1(z: float | np.ndarray, m: int, n: int, d: float) -> float | np.ndarray:
    """Two-model weight on the single-constraint submodel.

        w1(z) = 1 / (1 + (1 + z/m)^(n/2) * exp(-d/2))

    evaluated as a logistic of ``d/2 - (n/2) log1p(z/m)``, which stays
    finite for arbitrarily large ``z`` and ``n``.  ``z`` is the squared
    scaled coefficient estimate; vectorized over ``z``.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    out = expit(0.5 * d - 0.5 * n * np.log1p(z / m))
    return float(out) if out.ndim == 0 else out
