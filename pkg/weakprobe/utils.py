"""
Utility functions shared by the simulator modules and the command line
"""

from __future__ import annotations

from typing import Any, List, Sequence
import math

import numpy as np

from .errors import ConfigError, FitError


def pair_to_complex(value: Any) -> complex:
    """Parse [re, im] (or a bare real number) into a complex number."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number or [re, im] pair, got {value!r}")
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            return complex(float(value[0]), float(value[1]))
        except (TypeError, ValueError):
            pass
    raise ConfigError(f"expected a number or [re, im] pair, got {value!r}")


def vector_from_pairs(values: Sequence[Any]) -> np.ndarray:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("expected a non-empty list of [re, im] pairs")
    return np.array([pair_to_complex(v) for v in values], dtype=np.complex128)


def matrix_from_pairs(rows: Sequence[Sequence[Any]]) -> np.ndarray:
    if not isinstance(rows, (list, tuple)) or not rows:
        raise ConfigError("expected a non-empty matrix of [re, im] pairs")
    mat = np.array([[pair_to_complex(v) for v in row] for row in rows], dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"matrix must be square, got shape {mat.shape}")
    return mat


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Least-squares slope of log10(y) against log10(x).

    Args:
        xs: Positive abscissae (e.g. coupling strengths)
        ys: Positive residuals

    Returns:
        Fitted exponent of the power law y ~ x^slope
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) < 2 or np.any(x <= 0):
        raise FitError("log-log fit needs at least two positive abscissae")
    # Exact zeros would be -inf; floor them at the double-precision scale
    y = np.maximum(np.abs(y), np.finfo(float).tiny)
    slope, _ = np.polyfit(np.log10(x), np.log10(y), 1)
    return float(slope)


def polynomial_slope(xs: Sequence[float], ys: Sequence[float], order: int = 1):
    """
    Fit y = c0 + c1 x + ... + c_order x^order by ordinary least squares.

    Returns:
        Tuple (c1, standard error of c1)
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    n_distinct = len(np.unique(np.round(x, 15)))
    if n_distinct < order + 1 or n_distinct < 2:
        raise FitError(
            f"need at least {max(order + 1, 2)} distinct abscissae for an order-{order} fit, "
            f"got {n_distinct}"
        )
    design = np.vander(x, order + 1, increasing=True)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    dof = len(x) - (order + 1)
    if dof <= 0:
        return float(coef[1]), float("nan")
    resid = y - design @ coef
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    return float(coef[1]), float(math.sqrt(max(cov[1, 1], 0.0)))


def degree_grid(half_width_deg: float = 2.0, points: int = 9) -> List[float]:
    """Evenly spaced angles in radians over [-half_width, +half_width] degrees."""
    if points < 2:
        raise FitError("a fit window needs at least two points")
    return [float(v) for v in np.deg2rad(np.linspace(-half_width_deg, half_width_deg, points))]
