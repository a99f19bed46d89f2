"""
Mach-Zehnder polarization-rotation experiment

The path qubit is pre-selected in (|0> + |1>)/sqrt(2) and post-selected in
(|0> + e^{i delta}|1>)/sqrt(2), blended with I/2 according to the fringe
visibility V. A half-wave plate in path 0 rotates the polarization (the
probe, initially unpolarized) by an angle theta, which in the engine's
exp(-i g A (x) K) convention is the coupling g = -2 theta with A = P0 and
K = Z. The imaginary weak value of P0 is read off the slope of the
normalized circular polarization around theta = 0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .channels import QuantumChannel, apply
from .core import (
    ATOL,
    DensityOperator,
    Observable,
    PureState,
    expectation,
    pauli_z,
    projector_observable,
)
from .engine import WeakSetup, final_probe_state
from .errors import DegenerateSelectionError, InvalidStateError
from .utils import degree_grid, polynomial_slope

logger = logging.getLogger(__name__)

DEFAULT_HALF_WIDTH_DEG = 2.0
DEFAULT_FIT_POINTS = 9
MEASURED_VISIBILITY = 0.977


def _default_grid() -> List[float]:
    return degree_grid(DEFAULT_HALF_WIDTH_DEG, DEFAULT_FIT_POINTS)


def _default_probe() -> DensityOperator:
    return DensityOperator.maximally_mixed(2)


@dataclass(frozen=True, eq=False)
class MzConfig:
    """
    Interferometer settings.

    Attributes:
        delta: Relative phase of the post-selected path state (radians)
        visibility: Fringe visibility V in [0, 1]
        theta_grid: Half-wave-plate angles of the fit window (radians)
        probe: Initial polarization state (unpolarized by default)
        fit_order: 1 for a straight-line fit, 3 for a cubic whose linear
            coefficient is kept
        probe_noise: Optional channel applied to the probe before the interferometer
        output_noise: Optional channel applied to the probe after post-selection
    """

    delta: float = math.pi / 2
    visibility: float = 1.0
    theta_grid: Tuple[float, ...] = field(default_factory=lambda: tuple(_default_grid()))
    probe: DensityOperator = field(default_factory=_default_probe)
    fit_order: int = 1
    probe_noise: Optional[QuantumChannel] = None
    output_noise: Optional[QuantumChannel] = None

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise InvalidStateError(f"visibility must be in [0, 1], got {self.visibility}")
        grid = tuple(float(t) for t in self.theta_grid)
        if not grid:
            raise InvalidStateError("theta_grid must not be empty")
        if not np.allclose(np.sort(grid), np.sort(-np.asarray(grid)), atol=1e-12, rtol=0.0):
            raise InvalidStateError("theta_grid must be symmetric about 0")
        if self.probe.dim != 2:
            raise InvalidStateError("the polarization probe is a qubit")
        if self.fit_order not in (1, 3):
            raise InvalidStateError(f"fit_order must be 1 or 3, got {self.fit_order}")
        object.__setattr__(self, "theta_grid", grid)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "visibility", float(self.visibility))


@dataclass
class SweepRecord:
    """Extracted and analytic weak value for one post-selection phase."""

    delta: float
    extracted_im_weak_value: float
    analytic_im_weak_value: float
    fit_stderr: float
    power_curve: List[Tuple[float, float]]
    polarization_curve: List[Tuple[float, float]]

    def to_row(self) -> Dict[str, float]:
        return {
            "delta_rad": self.delta,
            "im_wv_extracted": self.extracted_im_weak_value,
            "im_wv_analytic": self.analytic_im_weak_value,
            "fit_stderr": self.fit_stderr,
        }


def pre_selection() -> PureState:
    return PureState.from_amplitudes([1.0, 1.0])


def post_selection(delta: float) -> PureState:
    return PureState.from_amplitudes([1.0, np.exp(1j * delta)])


def coupling_from_angle(theta: float) -> float:
    """Engine coupling for a half-wave-plate angle theta."""
    return -2.0 * theta


def mz_setup(cfg: MzConfig, theta: float = 0.0) -> WeakSetup:
    """
    WeakSetup for the interferometer at plate angle ``theta``.

    The unpolarized probe is passed through ``cfg.probe_noise`` first when one
    is configured; ``output_noise`` is applied by the callers that read out
    the probe.
    """
    post_pure = post_selection(cfg.delta)
    if cfg.visibility >= 1.0:
        post = post_pure
    else:
        post = DensityOperator(
            cfg.visibility * post_pure.projector() + (1.0 - cfg.visibility) * np.eye(2) / 2.0
        )
    probe = cfg.probe if cfg.probe_noise is None else apply(cfg.probe_noise, cfg.probe)
    return WeakSetup(
        pre=pre_selection(),
        post=post,
        A=projector_observable(0, 2),
        K=pauli_z(),
        theta=coupling_from_angle(theta),
        probe=probe,
    )


def _output_state(cfg: MzConfig, theta: float) -> DensityOperator:
    return final_probe_state(mz_setup(cfg, theta), post_noise=cfg.output_noise)


def analytic_outputs(cfg: MzConfig, theta: float) -> Tuple[float, float]:
    """
    Closed-form (tr sigma_f, tr[sigma_f Z]).

    For an unpolarized probe and V = 1 these are
    ((1 + cos d cos 2t)/2, -sin d sin 2t / 2). A general probe enters only
    through its Z populations (p0, p1), and V < 1 blends in the outcome of
    the I/2 effect, which leaves power 1/2 and polarization (p0 - p1)/2.
    ``output_noise`` is not modelled here.
    """
    probe = mz_setup(cfg).probe.normalized()
    p0 = float(probe.matrix[0, 0].real)
    p1 = float(probe.matrix[1, 1].real)
    d, V = cfg.delta, cfg.visibility
    plus = 0.5 * (1.0 + math.cos(d + 2.0 * theta))
    minus = 0.5 * (1.0 + math.cos(d - 2.0 * theta))
    power = V * (p0 * plus + p1 * minus) + (1.0 - V) * 0.5
    z = V * (p0 * plus - p1 * minus) + (1.0 - V) * 0.5 * (p0 - p1)
    return power, z


def im_weak_value_visibility(delta: float, visibility: float = 1.0) -> float:
    """V sin d / (2 (1 + V cos d)); equals tan(d/2)/2 at V = 1."""
    denom = 2.0 * (1.0 + visibility * math.cos(delta))
    if abs(denom) <= ATOL:
        return math.copysign(math.inf, math.sin(delta))
    return visibility * math.sin(delta) / denom


def max_im_weak_value(visibility: float) -> float:
    """Largest attainable Im<P0>_w, V / (2 sqrt(1 - V^2))."""
    if visibility >= 1.0:
        return math.inf
    return visibility / (2.0 * math.sqrt(1.0 - visibility ** 2))


def optimal_delta(visibility: float) -> float:
    """Phase maximizing Im<P0>_w, found numerically on (0, pi)."""
    if visibility >= 1.0:
        raise DegenerateSelectionError("with V = 1 the weak value diverges at the dark port")
    res = minimize_scalar(
        lambda d: -im_weak_value_visibility(d, visibility),
        bounds=(0.0, math.pi - 1e-9),
        method="bounded",
        options={"xatol": 1e-12},
    )
    logger.debug("optimal delta for V=%s: %s (closed form %s)", visibility, res.x, math.acos(-visibility))
    return float(res.x)


def _curves(cfg: MzConfig):
    Z = pauli_z()
    power, polarization = [], []
    for theta in cfg.theta_grid:
        sigma_f = _output_state(cfg, theta)
        tr = sigma_f.trace
        if tr <= ATOL:
            raise DegenerateSelectionError(
                f"dark port at delta={cfg.delta:.6g}, theta={theta:.6g}: output power {tr:.3e}",
                trace=tr,
            )
        power.append((theta, tr))
        polarization.append((theta, expectation(sigma_f, Z)))
    return power, polarization


def extract_weak_value(cfg: MzConfig) -> Tuple[float, float]:
    """
    Fit the normalized polarization tr(sigma_f Z)/tr(sigma_f) against theta
    and convert the slope at theta = 0 into Im<P0>_w = -slope / 4.

    Returns:
        (Im<P0>_w, standard error from the fit)
    """
    _, polarization = _curves(cfg)
    return _fit_weak_value(polarization, cfg.fit_order)


def _fit_weak_value(polarization, order: int) -> Tuple[float, float]:
    slope, stderr = polynomial_slope([t for t, _ in polarization], [z for _, z in polarization], order)
    return -slope / 4.0, stderr / 4.0


def _sweep_one(cfg: MzConfig) -> SweepRecord:
    power, polarization = _curves(cfg)
    extracted, stderr = _fit_weak_value(polarization, cfg.fit_order)
    return SweepRecord(
        delta=cfg.delta,
        extracted_im_weak_value=extracted,
        analytic_im_weak_value=im_weak_value_visibility(cfg.delta, cfg.visibility),
        fit_stderr=stderr,
        power_curve=power,
        polarization_curve=polarization,
    )


def sweep(deltas: Sequence[float], template: MzConfig, workers: int = 1) -> List[SweepRecord]:
    """
    One SweepRecord per post-selection phase, in the order of ``deltas``.

    Args:
        deltas: Post-selection phases (radians)
        template: Settings shared by every point; its delta is replaced
        workers: Thread count; the output order never depends on it

    Returns:
        List of SweepRecord
    """
    if not deltas:
        raise ValueError("deltas must not be empty")
    configs = [replace(template, delta=float(d)) for d in deltas]
    logger.info("sweeping %d phases at V=%s (fit order %d)", len(configs), template.visibility, template.fit_order)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_sweep_one, configs))
    return [_sweep_one(c) for c in configs]
