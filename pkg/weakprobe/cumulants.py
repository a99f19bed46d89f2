"""
Cumulants of the coupling observable K and their first-order shift.

The cumulant generating function of a probe state sigma is
Phi(s) = log[tr(sigma e^{sK}) / tr sigma]; its derivatives at s = 0 are the
cumulants. A weak measurement with weak value <A>_w shifts Phi by
2 theta Im<A>_w in s, so the n-th cumulant moves by
2 theta Im<A>_w times the (n+1)-th.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import List, Sequence
import logging

import numpy as np

from .core import ATOL, DensityOperator, Observable, expectation
from .engine import WeakSetup, evolve_exact, setup_weak_value
from .errors import DegenerateSelectionError, DimensionMismatchError

logger = logging.getLogger(__name__)

MAX_ORDER = 6


@dataclass
class CumulantSeries:
    """Cumulants kappa_1..kappa_max_order."""

    orders: List[float]
    max_order: int = field(init=False)

    def __post_init__(self):
        self.orders = [float(v) for v in self.orders]
        self.max_order = len(self.orders)
        if self.max_order >= 2 and self.orders[1] < -ATOL:
            raise ValueError(f"second cumulant {self.orders[1]:.3e} is negative")

    def __getitem__(self, n: int) -> float:
        """kappa_n with the 1-based order used in formulas."""
        if n < 1 or n > self.max_order:
            raise IndexError(f"cumulant order {n} outside 1..{self.max_order}")
        return self.orders[n - 1]

    def to_dict(self):
        return {f"k{n}": v for n, v in enumerate(self.orders, start=1)}


def _distribution(sigma: DensityOperator, K: Observable):
    if sigma.dim != K.dim:
        raise DimensionMismatchError(f"state dimension {sigma.dim} does not match K {K.dim}")
    tr = sigma.trace
    if tr <= ATOL:
        raise DegenerateSelectionError(f"state trace {tr:.3e} is below tolerance", trace=tr)
    probs = np.clip(K.populations(sigma), 0.0, None) / tr
    return probs, K.eigenvalues


def cgf(sigma: DensityOperator, K: Observable, s: float) -> float:
    """log[tr(sigma e^{sK}) / tr sigma], evaluated in K's eigenbasis."""
    probs, evals = _distribution(sigma, K)
    exponents = s * evals
    if np.max(np.abs(exponents)) < 1.0:
        # near s = 0 the cgf is tiny; log1p/expm1 keep its relative precision
        return float(np.log1p(np.sum(probs * np.expm1(exponents))))
    top = np.max(exponents)
    return float(top + np.log(np.sum(probs * np.exp(exponents - top))))


def raw_moments(sigma: DensityOperator, K: Observable, max_order: int) -> List[float]:
    """tr(sigma K^n) / tr sigma for n = 1..max_order."""
    probs, evals = _distribution(sigma, K)
    return [float(np.sum(probs * evals ** n)) for n in range(1, max_order + 1)]


def moments_to_cumulants(moments: Sequence[float]) -> List[float]:
    """
    kappa_n = m_n - sum_{k=1}^{n-1} C(n-1, k-1) kappa_k m_{n-k}.

    Args:
        moments: Raw moments m_1..m_N (m_0 = 1 implied)

    Returns:
        Cumulants kappa_1..kappa_N
    """
    m = [1.0] + list(moments)
    kappa = [0.0]
    for n in range(1, len(m)):
        value = m[n] - sum(comb(n - 1, k - 1) * kappa[k] * m[n - k] for k in range(1, n))
        kappa.append(value)
    return kappa[1:]


def cumulants_of(sigma: DensityOperator, K: Observable, max_order: int = 4) -> CumulantSeries:
    if max_order < 1 or max_order > MAX_ORDER:
        raise ValueError(f"max_order must be in 1..{MAX_ORDER}, got {max_order}")
    return CumulantSeries(moments_to_cumulants(raw_moments(sigma, K, max_order)))


def numerical_cumulants(sigma: DensityOperator, K: Observable, max_order: int = 4, step: float = 1e-2) -> List[float]:
    """
    Central finite differences of the cgf at s = 0 (orders 1..4), with one
    Richardson step between ``step`` and ``2 * step``.
    """
    if max_order > 4:
        raise ValueError("finite-difference cumulants are only provided up to order 4")

    def central(h: float) -> List[float]:
        f = {k: cgf(sigma, K, k * h) for k in (-2, -1, 0, 1, 2)}
        return [
            (f[1] - f[-1]) / (2 * h),
            (f[1] - 2 * f[0] + f[-1]) / h ** 2,
            (f[2] - 2 * f[1] + 2 * f[-1] - f[-2]) / (2 * h ** 3),
            (f[2] - 4 * f[1] + 6 * f[0] - 4 * f[-1] + f[-2]) / h ** 4,
        ]

    fine, coarse = central(step), central(2 * step)
    return [(4.0 * a - b) / 3.0 for a, b in zip(fine, coarse)][:max_order]


def predict_cumulant_shift(setup: WeakSetup, n: int) -> float:
    """First-order change of kappa_n: 2 theta Im<A>_w kappa_{n+1}(initial)."""
    if n < 1 or n + 1 > MAX_ORDER:
        raise ValueError(f"cumulant order n must be in 1..{MAX_ORDER - 1}, got {n}")
    w = setup_weak_value(setup)
    series = cumulants_of(setup.probe, setup.K, n + 1)
    return 2.0 * setup.theta * w.imag * series[n + 1]


def exact_cumulant_shift(setup: WeakSetup, n: int) -> float:
    """kappa_n(final) - kappa_n(initial) from the exact evolution."""
    if n < 1 or n > MAX_ORDER:
        raise ValueError(f"cumulant order n must be in 1..{MAX_ORDER}, got {n}")
    sigma_f, _ = evolve_exact(setup)
    final = cumulants_of(sigma_f, setup.K, n)
    initial = cumulants_of(setup.probe, setup.K, n)
    return final[n] - initial[n]


def verify_cgf_relation(setup: WeakSetup, s_grid: Sequence[float]) -> float:
    """
    Max over s of |Phi_f(s) - Phi_i(s + 2 theta Im<A>_w) + 2 theta Im<A>_w <K>_i|.
    """
    w = setup_weak_value(setup)
    shift = 2.0 * setup.theta * w.imag
    sigma_f, _ = evolve_exact(setup)
    mean_k = expectation(setup.probe, setup.K)
    residuals = [
        abs(cgf(sigma_f, setup.K, s) - (cgf(setup.probe, setup.K, s + shift) - shift * mean_k))
        for s in s_grid
    ]
    return float(max(residuals)) if residuals else 0.0
