"""
Invariant battery behind ``weakprobe verify``.

Each check builds its own seeded generator from the run seed and a stream
number, so results do not depend on which other checks ran.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Callable, Dict, List, Optional
import logging
import math

import numpy as np

from .channels import (
    apply,
    bit_flip,
    channels_equal,
    compose,
    identity_channel,
    is_phase_noise,
    is_unital,
)
from .config import VerifyConfig
from .core import PureState, dagger, pauli_z
from .cumulants import (
    cumulants_of,
    exact_cumulant_shift,
    numerical_cumulants,
    predict_cumulant_shift,
    verify_cgf_relation,
)
from .engine import (
    bloch_flow_field,
    effective_evolution_residual,
    equatorial_grid,
    evolve_exact,
    exact_shift,
    interaction_unitary,
    lift_probe_channel,
    monte_carlo,
    noisy_pipeline,
    predict_shift,
    predicted_snr,
    weak_value,
)
from .errors import ConfigError
from .experiment import (
    MEASURED_VISIBILITY,
    MzConfig,
    extract_weak_value,
    im_weak_value_visibility,
    max_im_weak_value,
    mz_setup,
    optimal_delta,
    sweep,
)
from .randomness import (
    make_rng,
    random_density,
    random_observable,
    random_pure_state,
    random_phase_noise,
    random_setup,
    random_unital_channel,
)
from .utils import loglog_slope

logger = logging.getLogger(__name__)

BITFLIP_AS_PHASE_NOISE = "bitflip-as-phase-noise"
FAULTS = (BITFLIP_AS_PHASE_NOISE,)

SCALING_THETAS = (1e-1, 1e-2, 1e-3)
SLOPE_TOLERANCE = 0.15
REPORTED_MAX_WEAK_VALUE = 2.26


@dataclass
class PropertyResult:
    """Outcome of one property check."""

    name: str
    passed: bool
    detail: str
    metric: float

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def _result(name: str, passed: bool, metric: float, detail: str) -> PropertyResult:
    logger.info("%s: %s (%s)", name, "pass" if passed else "FAIL", detail)
    return PropertyResult(name=name, passed=bool(passed), detail=detail, metric=float(metric))


def _mz_default() -> MzConfig:
    return MzConfig(delta=math.pi / 2, visibility=1.0)


# Weak values and channels

def check_weak_value_point(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    setup = mz_setup(_mz_default())
    w = weak_value(setup.pre, setup.post, setup.A)
    err = abs(w - (0.5 + 0.5j))
    return _result("weak-value-point", err <= 1e-12, err, f"<P0>_w = {w.real:.12g}{w.imag:+.12g}i")


def check_eigenstate_weak_value(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 1)
    worst = 0.0
    for _ in range(20):
        A = random_observable(3, rng)
        post = random_pure_state(3, rng)
        for k in range(A.dim):
            eig = PureState(A.eigenvector(k))
            worst = max(worst, abs(weak_value(eig, eig, A) - A.eigenvalues[k]))
            if abs(post.overlap(eig)) ** 2 > 1e-6:
                worst = max(worst, abs(weak_value(eig, post, A) - A.eigenvalues[k]))
    return _result("eigenstate-weak-value", worst <= 1e-10, worst, f"max deviation {worst:.3e}")


def check_channel_algebra(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 2)
    worst = 0.0
    ok = True
    for _ in range(20):
        a = random_unital_channel(2, rng)
        b = random_unital_channel(2, rng)
        rho = random_density(2, rng)
        seq = apply(a, apply(b, rho)).matrix
        worst = max(worst, float(np.max(np.abs(apply(compose(a, b), rho).matrix - seq))))
        worst = max(worst, abs(apply(a, rho).trace - rho.trace))
        ok = ok and is_unital(a) and channels_equal(compose(a, identity_channel(2)), a)
    passed = ok and worst <= 1e-12
    return _result("channel-algebra", passed, worst, f"composition/trace deviation {worst:.3e}")


# Phase noise

def _noise_pair(K, rng, fault: Optional[str]):
    if fault == BITFLIP_AS_PHASE_NOISE:
        return bit_flip(0.3), bit_flip(0.3)
    return random_phase_noise(K, rng), random_phase_noise(K, rng)


def check_phase_noise_invariance(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 3)
    worst = 0.0
    for _ in range(cfg.noise_setups):
        setup = random_setup(2, 2, rng, theta=float(rng.uniform(0.0, 1.0)))
        E_i, E_f = _noise_pair(setup.K, rng, fault)
        sigma_f, _ = evolve_exact(setup)
        clean = setup.K.populations(sigma_f)
        noisy = noisy_pipeline(setup, E_i, E_f)
        worst = max(worst, float(np.max(np.abs(noisy - clean))))
    return _result(
        "phase-noise-invariance", worst <= 1e-12, worst,
        f"max |p'_f - p_f| = {worst:.3e} over {cfg.noise_setups} setups",
    )


def check_phase_noise_commutes(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 4)
    worst = 0.0
    for _ in range(20):
        setup = random_setup(2, 2, rng, theta=float(rng.uniform(0.0, 1.0)))
        noise, _ = _noise_pair(setup.K, rng, fault)
        lifted = lift_probe_channel(noise, setup.dim_measured)
        U = interaction_unitary(setup.A, setup.K, setup.theta)
        joint = np.kron(random_density(2, rng).matrix, setup.probe.matrix)
        a = lifted.act(U @ joint @ dagger(U))
        b = U @ lifted.act(joint) @ dagger(U)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return _result("phase-noise-commutes", worst <= 1e-12, worst, f"max commutator residue {worst:.3e}")


def check_phase_noise_detection(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 5)
    K = random_observable(3, rng, degenerate=True)
    detected = is_phase_noise(random_phase_noise(K, rng), K)
    rejected = not is_phase_noise(bit_flip(0.3), pauli_z())
    passed = detected and rejected
    return _result("phase-noise-detection", passed, float(passed), "phase noise accepted, bit flip rejected")


# First-order theory

def _scaling(residual: Callable, setups) -> float:
    means = [np.mean([residual(s.with_theta(t)) for s in setups]) for t in SCALING_THETAS]
    return loglog_slope(SCALING_THETAS, means)


def check_first_order_scaling(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 6)
    cases = []
    for _ in range(cfg.scaling_setups):
        setup = random_setup(2, 2, rng)
        cases.append((setup, random_observable(2, rng)))

    def residual_for(theta):
        return np.mean([abs(exact_shift(s.with_theta(theta), M) - predict_shift(s.with_theta(theta), M))
                        for s, M in cases])

    slope = loglog_slope(SCALING_THETAS, [residual_for(t) for t in SCALING_THETAS])
    passed = abs(slope - 2.0) <= SLOPE_TOLERANCE
    return _result("first-order-scaling", passed, slope, f"log-log slope {slope:.4f}")


def check_effective_evolution(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 7)
    setups = [random_setup(2, 2, rng) for _ in range(20)]
    slope = _scaling(
        lambda s: effective_evolution_residual(s.pre, s.post, s.A, s.K, s.theta), setups
    )
    passed = abs(slope - 2.0) <= SLOPE_TOLERANCE
    return _result("effective-evolution", passed, slope, f"log-log slope {slope:.4f}")


# Cumulants

def check_cumulant_law(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 8)
    slopes = []
    for dim in (2, 3):
        setups = [random_setup(dim, dim, rng) for _ in range(10)]
        for n in (1, 2, 3):
            slopes.append(_scaling(
                lambda s, n=n: abs(exact_cumulant_shift(s, n) - predict_cumulant_shift(s, n)), setups
            ))
    worst = max(abs(s - 2.0) for s in slopes)
    detail = "slopes " + ", ".join(f"{s:.3f}" for s in slopes)
    return _result("cumulant-law", worst <= SLOPE_TOLERANCE, worst, detail)


def check_mixed_probe_variance(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    setup = mz_setup(_mz_default()).with_theta(1e-3)
    predicted = predict_cumulant_shift(setup, 2)
    exact = exact_cumulant_shift(setup, 2)
    passed = abs(predicted) <= 1e-12 and abs(exact) <= 1e-5
    return _result(
        "mixed-probe-variance", passed, abs(exact),
        f"first-order variance change {predicted:.3e}, exact {exact:.3e}",
    )


def check_cgf_relation(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 9)
    setups = [random_setup(2, 2, rng) for _ in range(10)]
    grid = np.linspace(-1.0, 1.0, 11)
    slope = _scaling(lambda s: verify_cgf_relation(s, grid), setups)
    passed = abs(slope - 2.0) <= SLOPE_TOLERANCE
    return _result("cgf-relation", passed, slope, f"log-log slope {slope:.4f}")


def check_numerical_cumulants(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 10)
    worst = 0.0
    for dim in (2, 3):
        for _ in range(10):
            sigma = random_density(dim, rng)
            K = random_observable(dim, rng)
            exact = cumulants_of(sigma, K, 4).orders
            approx = numerical_cumulants(sigma, K, 4)
            worst = max(worst, max(abs(a - b) for a, b in zip(exact, approx)))
    return _result("numerical-cumulants", worst <= 1e-6, worst, f"max deviation {worst:.3e}")


# Signal-to-noise

def check_mixed_probe_optimal(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 11)
    base = mz_setup(_mz_default()).with_theta(0.01)
    reference = abs(predicted_snr(base, 1))
    excess = -math.inf
    for _ in range(cfg.random_probes):
        probe = random_density(2, rng, rank=int(rng.integers(1, 3)))
        excess = max(excess, abs(predicted_snr(base.with_probe(probe), 1)) - reference)
    return _result(
        "mixed-probe-optimal", excess <= 1e-12, excess,
        f"largest excess over I/2 SNR {excess:.3e} ({cfg.random_probes} probes)",
    )


def check_snr_consistency(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    setup = mz_setup(_mz_default()).with_theta(0.01)
    N = cfg.montecarlo_shots
    predicted = predicted_snr(setup, N)
    worst = 0.0
    for k in range(cfg.montecarlo_seeds):
        result = monte_carlo(setup, setup.K, N, seed + k)
        # the empirical SNR scatters with unit standard deviation
        worst = max(worst, abs(result.empirical_snr - predicted))
    return _result(
        "snr-consistency", worst <= 3.0, worst,
        f"predicted {predicted:.4f}, max |empirical - predicted| {worst:.3f} over {cfg.montecarlo_seeds} seeds",
    )


def check_montecarlo_determinism(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    setup = mz_setup(_mz_default()).with_theta(0.05)
    runs = [
        monte_carlo(setup, setup.K, 200_000, seed, workers=w, chunk_size=50_000).to_dict()
        for w in (1, 1, 4)
    ]
    passed = runs[0] == runs[1] == runs[2]
    return _result("montecarlo-determinism", passed, float(passed), "identical across repeats and worker counts")


# Interferometer

def check_mz_point(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    value, _ = extract_weak_value(_mz_default())
    err = abs(value - 0.5)
    return _result("mz-point", err <= 1e-3, err, f"extracted Im<P0>_w = {value:.6f}")


def check_mz_visibility_sweep(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    V = MEASURED_VISIBILITY
    template = MzConfig(visibility=V, fit_order=3)
    records = sweep(list(np.linspace(0.0, 2.8, 57)), template)
    worst = max(abs(r.extracted_im_weak_value - r.analytic_im_weak_value) for r in records)
    d_opt = optimal_delta(V)
    peak = max_im_weak_value(V)
    peak_extracted, _ = extract_weak_value(replace(template, delta=d_opt))
    passed = (
        worst <= 1e-2
        and abs(d_opt - math.acos(-V)) <= 1e-6
        and abs(im_weak_value_visibility(d_opt, V) - peak) <= 1e-9
        and abs(peak - REPORTED_MAX_WEAK_VALUE) / REPORTED_MAX_WEAK_VALUE <= 0.03
        and abs(peak_extracted - peak) <= 1e-2
    )
    return _result(
        "mz-visibility-sweep", passed, worst,
        f"max |extracted - analytic| {worst:.3e}, peak {peak:.4f} at delta {d_opt:.6f} "
        f"(extracted {peak_extracted:.4f})",
    )


def check_unital_immunity(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    rng = make_rng(seed, 12)
    deltas = [0.5, math.pi / 2, 2.5]
    clean = sweep(deltas, MzConfig())
    worst = 0.0
    for _ in range(cfg.unital_channels):
        noisy = sweep(deltas, MzConfig(probe_noise=random_unital_channel(2, rng)))
        for a, b in zip(clean, noisy):
            worst = max(worst, abs(a.extracted_im_weak_value - b.extracted_im_weak_value))
            for (_, pa), (_, pb) in zip(a.power_curve + a.polarization_curve,
                                        b.power_curve + b.polarization_curve):
                worst = max(worst, abs(pa - pb))
    return _result(
        "unital-immunity", worst <= 1e-12, worst,
        f"max output change {worst:.3e} over {cfg.unital_channels} channels",
    )


# Bloch flow

def check_flow_field(seed: int, cfg: VerifyConfig, fault: Optional[str]) -> PropertyResult:
    setup = mz_setup(_mz_default())
    flow = bloch_flow_field(setup.A, setup.K, setup.pre, setup.post, equatorial_grid([0.3, 0.6, 0.9], 8))
    origin = max(abs(v) for v in flow[0].velocity_re)
    vz = [f.velocity_im[2] for f in flow]
    spread = max(vz) - min(vz)
    real_flow = bloch_flow_field(setup.A, setup.K, setup.pre, setup.pre, equatorial_grid([0.5], 6))
    im_residue = max(abs(v) for f in real_flow for v in f.velocity_im)
    metric = max(origin, spread, im_residue)
    return _result(
        "flow-field", metric <= 1e-12, metric,
        f"origin Re-flow {origin:.1e}, equatorial vz spread {spread:.1e}, Im-flow at real w {im_residue:.1e}",
    )


CHECKS = (
    check_weak_value_point,
    check_eigenstate_weak_value,
    check_channel_algebra,
    check_phase_noise_invariance,
    check_phase_noise_commutes,
    check_phase_noise_detection,
    check_first_order_scaling,
    check_effective_evolution,
    check_cumulant_law,
    check_mixed_probe_variance,
    check_cgf_relation,
    check_numerical_cumulants,
    check_mixed_probe_optimal,
    check_snr_consistency,
    check_montecarlo_determinism,
    check_mz_point,
    check_mz_visibility_sweep,
    check_unital_immunity,
    check_flow_field,
)


def run_all(
    seed: int = 0,
    cfg: Optional[VerifyConfig] = None,
    inject_fault: Optional[str] = None,
) -> List[PropertyResult]:
    """
    Run every property check in a fixed order.

    Args:
        seed: Base seed for all random draws
        cfg: Battery sizes (defaults to VerifyConfig())
        inject_fault: Optional deliberate fault, e.g. 'bitflip-as-phase-noise'

    Returns:
        List of PropertyResult, one per check
    """
    cfg = VerifyConfig() if cfg is None else cfg
    fault = inject_fault if inject_fault is not None else cfg.inject_fault
    if fault is not None and fault not in FAULTS:
        raise ConfigError(f"unknown fault '{fault}'; choose one of {', '.join(FAULTS)}")
    if fault is not None:
        logger.warning("injecting fault %s", fault)
    return [check(seed, cfg, fault) for check in CHECKS]
